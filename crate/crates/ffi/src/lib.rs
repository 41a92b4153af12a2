//! C ABI for the deployment side of the pipeline: loading serialized
//! (optionally entropy-encoded) models, running inference with threshold
//! gating, and the analytic energy model.
//!
//! Conventions:
//! - Every fallible call returns a [`PsStatus`]; on failure a thread-local
//!   message is readable via [`ps_last_error_message`].
//! - Models are opaque handles created by the `ps_model_from_*` constructors
//!   and released with [`ps_model_free`].
//! - Windows are passed as flat `float` arrays, time-major
//!   (`t0x, t0y, t0z, t1x, ...`), with exactly `3 * ps_model_input_len`
//!   values.
//! - Class indices are `0` Forklift, `1` Truck, `2` Dummy.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::slice;

use packsense::dataio::TimeWindow;
use packsense::decide::{classify, ThresholdPolicy};
use packsense::nnet::SoftDecision;
use packsense::runtime::{
    deserialize, estimate_inference_energy, huffman_decode, EncodedModel, EnergyProfile, Model,
    QEngine,
};

/// Result of every fallible FFI call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument had an invalid value (wrong length, out-of-range).
    InvalidArgument = 2,
    /// The model bytes could not be decoded or deserialized.
    BadModel = 3,
    /// Inference failed (input shape mismatch or internal error).
    InferenceError = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn fail(status: PsStatus, msg: impl std::fmt::Display) -> PsStatus {
    let text = msg.to_string().replace('\0', " ");
    LAST_ERROR.with(|e| {
        *e.borrow_mut() = CString::new(text).unwrap_or_default();
    });
    status
}

/// Message for the most recent failure on this thread. The pointer stays
/// valid until the next failing call on the same thread; never free it.
#[no_mangle]
pub extern "C" fn ps_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static name of a status code (e.g. `"ok"`, `"bad_model"`).
#[no_mangle]
pub extern "C" fn ps_status_name(status: PsStatus) -> *const c_char {
    let name: &'static [u8] = match status {
        PsStatus::Ok => b"ok\0",
        PsStatus::NullArgument => b"null_argument\0",
        PsStatus::InvalidArgument => b"invalid_argument\0",
        PsStatus::BadModel => b"bad_model\0",
        PsStatus::InferenceError => b"inference_error\0",
    };
    name.as_ptr() as *const c_char
}

/// Opaque handle to a loaded model (float or quantized).
pub struct PsModel {
    model: Model,
    input_len: usize,
    num_classes: usize,
}

fn infer_window(model: &Model, window: &TimeWindow) -> packsense::Result<SoftDecision> {
    match model {
        Model::Float(m) => {
            let logits = m.forward_eval(window)?;
            Ok(packsense::nnet::softmax(&logits))
        }
        Model::Quantized(q) => QEngine::new(q)?.forward(window),
    }
}

fn handle_from_model(model: Model) -> Result<PsModel, String> {
    let input_len = match &model {
        Model::Float(m) => m.input_len,
        Model::Quantized(q) => q.input_len,
    };
    // A probe forward pass both validates the network and yields the output
    // dimension without depending on layer internals.
    let probe = TimeWindow::new(vec![0.0; input_len * 3], input_len, None)
        .map_err(|e| e.to_string())?;
    let probs = infer_window(&model, &probe).map_err(|e| e.to_string())?;
    Ok(PsModel {
        model,
        input_len,
        num_classes: probs.probs.len(),
    })
}

unsafe fn input_bytes<'a>(data: *const u8, len: usize) -> Option<&'a [u8]> {
    if data.is_null() {
        None
    } else {
        Some(slice::from_raw_parts(data, len))
    }
}

fn emit_model(out: *mut *mut PsModel, model: Model) -> PsStatus {
    match handle_from_model(model) {
        Ok(handle) => {
            unsafe { *out = Box::into_raw(Box::new(handle)) };
            PsStatus::Ok
        }
        Err(e) => fail(PsStatus::BadModel, e),
    }
}

/// Loads a model from its serialized container bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_model_from_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut PsModel,
) -> PsStatus {
    if out.is_null() {
        return fail(PsStatus::NullArgument, "out is null");
    }
    let Some(bytes) = input_bytes(data, len) else {
        return fail(PsStatus::NullArgument, "data is null");
    };
    match deserialize(bytes) {
        Ok(model) => emit_model(out, model),
        Err(e) => fail(PsStatus::BadModel, e),
    }
}

/// Loads a model from entropy-encoded bytes (the `encode` artifact):
/// decodes the canonical Huffman container, then deserializes.
///
/// # Safety
/// `data` must point to `len` readable bytes; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_model_from_encoded_bytes(
    data: *const u8,
    len: usize,
    out: *mut *mut PsModel,
) -> PsStatus {
    if out.is_null() {
        return fail(PsStatus::NullArgument, "out is null");
    }
    let Some(bytes) = input_bytes(data, len) else {
        return fail(PsStatus::NullArgument, "data is null");
    };
    let decoded = match EncodedModel::from_bytes(bytes).and_then(|e| huffman_decode(&e)) {
        Ok(d) => d,
        Err(e) => return fail(PsStatus::BadModel, e),
    };
    match deserialize(&decoded) {
        Ok(model) => emit_model(out, model),
        Err(e) => fail(PsStatus::BadModel, e),
    }
}

/// Releases a model handle. Null is a no-op.
///
/// # Safety
/// `model` must be a pointer previously returned by a `ps_model_from_*`
/// constructor, and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn ps_model_free(model: *mut PsModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Model kind: 0 float, 1 quantized, -1 if `model` is null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_model_kind(model: *const PsModel) -> i32 {
    match model.as_ref() {
        None => -1,
        Some(h) => match h.model {
            Model::Float(_) => 0,
            Model::Quantized(_) => 1,
        },
    }
}

/// Expected window length in time steps (each step carries 3 axis values);
/// 0 if `model` is null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_model_input_len(model: *const PsModel) -> usize {
    model.as_ref().map_or(0, |h| h.input_len)
}

/// Number of output classes; 0 if `model` is null.
///
/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ps_model_num_classes(model: *const PsModel) -> usize {
    model.as_ref().map_or(0, |h| h.num_classes)
}

unsafe fn window_from_raw(
    handle: &PsModel,
    values: *const f32,
    values_len: usize,
) -> Result<TimeWindow, PsStatus> {
    if values.is_null() {
        return Err(fail(PsStatus::NullArgument, "values is null"));
    }
    let expected = handle.input_len * 3;
    if values_len != expected {
        return Err(fail(
            PsStatus::InvalidArgument,
            format!("expected {expected} values, got {values_len}"),
        ));
    }
    let data = slice::from_raw_parts(values, values_len).to_vec();
    TimeWindow::new(data, handle.input_len, None)
        .map_err(|e| fail(PsStatus::InvalidArgument, e))
}

/// Runs one window through the model and writes the class probabilities.
/// `probs_out` must hold at least `ps_model_num_classes` floats; the number
/// written is stored in `written` when it is non-null.
///
/// # Safety
/// `model` must be a live handle; `values` must point to `values_len`
/// floats; `probs_out` must point to `probs_cap` writable floats.
#[no_mangle]
pub unsafe extern "C" fn ps_model_infer(
    model: *const PsModel,
    values: *const f32,
    values_len: usize,
    probs_out: *mut f32,
    probs_cap: usize,
    written: *mut usize,
) -> PsStatus {
    let Some(handle) = model.as_ref() else {
        return fail(PsStatus::NullArgument, "model is null");
    };
    if probs_out.is_null() {
        return fail(PsStatus::NullArgument, "probs_out is null");
    }
    if probs_cap < handle.num_classes {
        return fail(
            PsStatus::InvalidArgument,
            format!("probs_cap {} < {} classes", probs_cap, handle.num_classes),
        );
    }
    let window = match window_from_raw(handle, values, values_len) {
        Ok(w) => w,
        Err(status) => return status,
    };
    match infer_window(&handle.model, &window) {
        Ok(probs) => {
            let out = slice::from_raw_parts_mut(probs_out, handle.num_classes);
            out.copy_from_slice(&probs.probs);
            if !written.is_null() {
                *written = handle.num_classes;
            }
            PsStatus::Ok
        }
        Err(e) => fail(PsStatus::InferenceError, e),
    }
}

/// Classifies one window with threshold gating: the winning target class
/// must exceed its threshold or the window is rejected into Dummy (class 2).
/// Thresholds are probabilities in [0, 1].
///
/// # Safety
/// `model` must be a live handle; `values` must point to `values_len`
/// floats; `label_out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ps_model_classify(
    model: *const PsModel,
    values: *const f32,
    values_len: usize,
    threshold_forklift: f64,
    threshold_truck: f64,
    label_out: *mut i32,
) -> PsStatus {
    let Some(handle) = model.as_ref() else {
        return fail(PsStatus::NullArgument, "model is null");
    };
    if label_out.is_null() {
        return fail(PsStatus::NullArgument, "label_out is null");
    }
    let policy = match ThresholdPolicy::new([threshold_forklift, threshold_truck]) {
        Ok(p) => p,
        Err(e) => return fail(PsStatus::InvalidArgument, e),
    };
    let window = match window_from_raw(handle, values, values_len) {
        Ok(w) => w,
        Err(status) => return status,
    };
    match infer_window(&handle.model, &window) {
        Ok(probs) => {
            *label_out = classify(&probs, &policy).index() as i32;
            PsStatus::Ok
        }
        Err(e) => fail(PsStatus::InferenceError, e),
    }
}

/// Analytic per-inference energy: total = active power × duration, marginal
/// = (active − baseline) × duration, both in millijoules.
///
/// # Safety
/// `total_mj` and `marginal_mj` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ps_energy_estimate(
    active_power_mw: f64,
    baseline_power_mw: f64,
    inference_duration_ms: f64,
    total_mj: *mut f64,
    marginal_mj: *mut f64,
) -> PsStatus {
    if total_mj.is_null() || marginal_mj.is_null() {
        return fail(PsStatus::NullArgument, "output pointer is null");
    }
    let profile = EnergyProfile {
        active_power_mw,
        baseline_power_mw,
        inference_duration_ms,
    };
    match estimate_inference_energy(&profile) {
        Ok(est) => {
            *total_mj = est.total_mj;
            *marginal_mj = est.marginal_mj;
            PsStatus::Ok
        }
        Err(e) => fail(PsStatus::InvalidArgument, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use packsense::nnet::default_architecture;
    use packsense::runtime::{huffman_encode, serialize_float};
    use std::ffi::CStr;
    use std::ptr;

    fn tiny_model_bytes() -> Vec<u8> {
        let model = default_architecture(16, 3, 7).unwrap();
        serialize_float(&model)
    }

    fn load(bytes: &[u8]) -> *mut PsModel {
        let mut handle = ptr::null_mut();
        let status = unsafe { ps_model_from_bytes(bytes.as_ptr(), bytes.len(), &mut handle) };
        assert_eq!(status, PsStatus::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn load_query_infer_free() {
        let bytes = tiny_model_bytes();
        let handle = load(&bytes);
        unsafe {
            assert_eq!(ps_model_kind(handle), 0);
            assert_eq!(ps_model_input_len(handle), 16);
            assert_eq!(ps_model_num_classes(handle), 3);

            let window = vec![0.25f32; 16 * 3];
            let mut probs = [0f32; 3];
            let mut written = 0usize;
            let status = ps_model_infer(
                handle,
                window.as_ptr(),
                window.len(),
                probs.as_mut_ptr(),
                probs.len(),
                &mut written,
            );
            assert_eq!(status, PsStatus::Ok);
            assert_eq!(written, 3);
            let sum: f32 = probs.iter().sum();
            assert!((sum - 1.0).abs() < 1e-5, "probs sum {sum}");

            let mut label = -1i32;
            let status = ps_model_classify(
                handle,
                window.as_ptr(),
                window.len(),
                0.0,
                0.0,
                &mut label,
            );
            assert_eq!(status, PsStatus::Ok);
            // Zero thresholds reduce to argmax over the returned probs.
            let argmax = probs
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0 as i32;
            assert_eq!(label, argmax);
            ps_model_free(handle);
        }
    }

    #[test]
    fn encoded_round_trip_matches_plain_load() {
        let bytes = tiny_model_bytes();
        let encoded = huffman_encode(&bytes).unwrap().to_bytes();
        let mut handle = ptr::null_mut();
        let status =
            unsafe { ps_model_from_encoded_bytes(encoded.as_ptr(), encoded.len(), &mut handle) };
        assert_eq!(status, PsStatus::Ok);
        unsafe {
            assert_eq!(ps_model_input_len(handle), 16);
            ps_model_free(handle);
        }
    }

    #[test]
    fn errors_reported_with_messages() {
        let bytes = tiny_model_bytes();
        unsafe {
            // Corrupt container.
            let mut handle = ptr::null_mut();
            let mut bad = bytes.clone();
            bad[0] ^= 0xFF;
            let status = ps_model_from_bytes(bad.as_ptr(), bad.len(), &mut handle);
            assert_eq!(status, PsStatus::BadModel);
            assert!(handle.is_null());
            let msg = CStr::from_ptr(ps_last_error_message());
            assert!(!msg.to_bytes().is_empty());

            // Null and shape errors.
            let status = ps_model_from_bytes(ptr::null(), 0, &mut handle);
            assert_eq!(status, PsStatus::NullArgument);

            let handle = load(&bytes);
            let window = vec![0.0f32; 5];
            let mut probs = [0f32; 3];
            let status = ps_model_infer(
                handle,
                window.as_ptr(),
                window.len(),
                probs.as_mut_ptr(),
                probs.len(),
                ptr::null_mut(),
            );
            assert_eq!(status, PsStatus::InvalidArgument);

            let mut label = 0i32;
            let status = ps_model_classify(
                handle,
                window.as_ptr(),
                16 * 3,
                1.5, // out of range threshold
                0.0,
                &mut label,
            );
            assert_eq!(status, PsStatus::InvalidArgument);
            ps_model_free(handle);
        }
    }

    #[test]
    fn null_handle_queries_are_safe() {
        unsafe {
            assert_eq!(ps_model_kind(ptr::null()), -1);
            assert_eq!(ps_model_input_len(ptr::null()), 0);
            assert_eq!(ps_model_num_classes(ptr::null()), 0);
            ps_model_free(ptr::null_mut());
        }
    }

    #[test]
    fn energy_estimate_matches_reference_arithmetic() {
        let mut total = 0.0;
        let mut marginal = 0.0;
        let status =
            unsafe { ps_energy_estimate(316.0, 300.0, 27.0, &mut total, &mut marginal) };
        assert_eq!(status, PsStatus::Ok);
        assert_eq!(total, 8.532);
        assert_eq!(marginal, 0.432);

        let status =
            unsafe { ps_energy_estimate(-1.0, 300.0, 27.0, &mut total, &mut marginal) };
        assert_eq!(status, PsStatus::InvalidArgument);
    }

    #[test]
    fn status_names_are_stable() {
        unsafe {
            assert_eq!(
                CStr::from_ptr(ps_status_name(PsStatus::Ok)).to_str().unwrap(),
                "ok"
            );
            assert_eq!(
                CStr::from_ptr(ps_status_name(PsStatus::BadModel))
                    .to_str()
                    .unwrap(),
                "bad_model"
            );
        }
    }
}
