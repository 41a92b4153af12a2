//! Canonical Huffman codec over bytes. The table stores only the 256 code
//! lengths; codes are reconstructed canonically (sorted by length, then
//! symbol), so encoder and decoder agree bit-exactly by construction.

use crate::error::{Error, Result};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

pub const TABLE_SIZE: usize = 256;

/// Entropy-encoded byte stream: code-length table, payload bit count, and
/// the MSB-first bitstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodedModel {
    pub lengths: [u8; TABLE_SIZE],
    pub bit_count: u64,
    pub payload: Vec<u8>,
}

/// Huffman code lengths from byte frequencies. Deterministic: heap ties
/// break by the smallest symbol contained in each subtree. A single
/// distinct symbol gets a 1-bit code.
fn code_lengths(freqs: &[u64; TABLE_SIZE]) -> [u8; TABLE_SIZE] {
    #[derive(Clone)]
    struct Node {
        freq: u64,
        min_symbol: u16,
        symbols: Vec<u8>,
    }
    let mut lengths = [0u8; TABLE_SIZE];
    let mut heap: BinaryHeap<Reverse<(u64, u16, usize)>> = BinaryHeap::new();
    let mut nodes: Vec<Node> = Vec::new();
    for (b, &f) in freqs.iter().enumerate() {
        if f > 0 {
            heap.push(Reverse((f, b as u16, nodes.len())));
            nodes.push(Node {
                freq: f,
                min_symbol: b as u16,
                symbols: vec![b as u8],
            });
        }
    }
    if heap.is_empty() {
        return lengths;
    }
    if heap.len() == 1 {
        let Reverse((_, _, i)) = heap.pop().unwrap();
        lengths[nodes[i].symbols[0] as usize] = 1;
        return lengths;
    }
    while heap.len() > 1 {
        let Reverse((_, _, a)) = heap.pop().unwrap();
        let Reverse((_, _, b)) = heap.pop().unwrap();
        for &s in nodes[a].symbols.iter().chain(&nodes[b].symbols) {
            lengths[s as usize] += 1;
        }
        let merged = Node {
            freq: nodes[a].freq + nodes[b].freq,
            min_symbol: nodes[a].min_symbol.min(nodes[b].min_symbol),
            symbols: {
                let mut v = nodes[a].symbols.clone();
                v.extend_from_slice(&nodes[b].symbols);
                v
            },
        };
        heap.push(Reverse((merged.freq, merged.min_symbol, nodes.len())));
        nodes.push(merged);
    }
    lengths
}

/// Kraft sum as a fraction of 2^-64; `None` when it exceeds 1.
fn kraft_check(lengths: &[u8; TABLE_SIZE]) -> Result<()> {
    let mut sum: u128 = 0;
    for &l in lengths {
        if l > 0 {
            if l > 64 {
                return Err(Error::InvalidHuffmanTable(format!(
                    "code length {l} exceeds 64"
                )));
            }
            sum += 1u128 << (64 - l as u32);
        }
    }
    if sum > 1u128 << 64 {
        return Err(Error::InvalidHuffmanTable(
            "code lengths violate the Kraft inequality".into(),
        ));
    }
    Ok(())
}

/// Canonical codes: symbols sorted by (length, symbol), codes assigned in
/// increasing order, shifted left when the length grows.
fn canonical_codes(lengths: &[u8; TABLE_SIZE]) -> [(u64, u8); TABLE_SIZE] {
    let mut order: Vec<u8> = (0..TABLE_SIZE as u16).map(|b| b as u8).collect();
    order.retain(|&b| lengths[b as usize] > 0);
    order.sort_by_key(|&b| (lengths[b as usize], b));
    let mut codes = [(0u64, 0u8); TABLE_SIZE];
    let mut code = 0u64;
    let mut prev_len = 0u8;
    for &b in &order {
        let len = lengths[b as usize];
        code <<= len - prev_len;
        codes[b as usize] = (code, len);
        code += 1;
        prev_len = len;
    }
    codes
}

struct BitWriter {
    bytes: Vec<u8>,
    bit_count: u64,
}

impl BitWriter {
    fn new() -> BitWriter {
        BitWriter {
            bytes: Vec::new(),
            bit_count: 0,
        }
    }

    fn push_code(&mut self, code: u64, len: u8) {
        for i in (0..len).rev() {
            let bit = (code >> i) & 1;
            let offset = (self.bit_count % 8) as u8;
            if offset == 0 {
                self.bytes.push(0);
            }
            if bit == 1 {
                *self.bytes.last_mut().unwrap() |= 0x80 >> offset;
            }
            self.bit_count += 1;
        }
    }
}

pub fn huffman_encode(bytes: &[u8]) -> Result<EncodedModel> {
    if bytes.is_empty() {
        return Err(Error::Config("cannot encode an empty byte sequence".into()));
    }
    let mut freqs = [0u64; TABLE_SIZE];
    for &b in bytes {
        freqs[b as usize] += 1;
    }
    let lengths = code_lengths(&freqs);
    let codes = canonical_codes(&lengths);
    let mut writer = BitWriter::new();
    for &b in bytes {
        let (code, len) = codes[b as usize];
        writer.push_code(code, len);
    }
    Ok(EncodedModel {
        lengths,
        bit_count: writer.bit_count,
        payload: writer.bytes,
    })
}

pub fn huffman_decode(encoded: &EncodedModel) -> Result<Vec<u8>> {
    kraft_check(&encoded.lengths)?;
    let needed_bytes = encoded.bit_count.div_ceil(8) as usize;
    if encoded.payload.len() < needed_bytes {
        return Err(Error::Truncated(format!(
            "payload holds {} bytes but {} bits are declared",
            encoded.payload.len(),
            encoded.bit_count
        )));
    }
    // Per-length canonical decode tables: first code, first symbol rank,
    // and the rank-ordered symbol list.
    let mut symbols: Vec<u8> = (0..TABLE_SIZE as u16).map(|b| b as u8).collect();
    symbols.retain(|&b| encoded.lengths[b as usize] > 0);
    symbols.sort_by_key(|&b| (encoded.lengths[b as usize], b));
    if symbols.is_empty() && encoded.bit_count > 0 {
        return Err(Error::InvalidHuffmanTable(
            "empty table with a non-empty payload".into(),
        ));
    }
    let max_len = symbols
        .iter()
        .map(|&b| encoded.lengths[b as usize])
        .max()
        .unwrap_or(0);
    let mut first_code = vec![0u64; max_len as usize + 2];
    let mut first_rank = vec![0usize; max_len as usize + 2];
    let mut count = vec![0usize; max_len as usize + 1];
    for &b in &symbols {
        count[encoded.lengths[b as usize] as usize] += 1;
    }
    let mut code = 0u64;
    let mut rank = 0usize;
    for len in 1..=max_len as usize {
        first_code[len] = code;
        first_rank[len] = rank;
        code = (code + count[len] as u64) << 1;
        rank += count[len];
    }

    let mut out = Vec::new();
    let mut acc = 0u64;
    let mut acc_len = 0u8;
    for bit_idx in 0..encoded.bit_count {
        let byte = encoded.payload[(bit_idx / 8) as usize];
        let bit = (byte >> (7 - (bit_idx % 8))) & 1;
        acc = (acc << 1) | bit as u64;
        acc_len += 1;
        if acc_len > max_len {
            return Err(Error::CorruptPayload(format!(
                "no code matches after {acc_len} bits"
            )));
        }
        let len = acc_len as usize;
        let offset = acc.wrapping_sub(first_code[len]);
        if (offset as usize) < count[len] {
            out.push(symbols[first_rank[len] + offset as usize]);
            acc = 0;
            acc_len = 0;
        }
    }
    if acc_len != 0 {
        return Err(Error::CorruptPayload(format!(
            "bitstream ends mid-symbol with {acc_len} dangling bits"
        )));
    }
    Ok(out)
}

impl EncodedModel {
    /// Byte layout: 256-byte length table, u64 LE bit count, payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(TABLE_SIZE + 8 + self.payload.len());
        out.extend_from_slice(&self.lengths);
        out.extend_from_slice(&self.bit_count.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<EncodedModel> {
        if bytes.len() < TABLE_SIZE + 8 {
            return Err(Error::Truncated(format!(
                "encoded stream of {} bytes is shorter than its header",
                bytes.len()
            )));
        }
        let mut lengths = [0u8; TABLE_SIZE];
        lengths.copy_from_slice(&bytes[..TABLE_SIZE]);
        let bit_count = u64::from_le_bytes(bytes[TABLE_SIZE..TABLE_SIZE + 8].try_into().unwrap());
        let payload = bytes[TABLE_SIZE + 8..].to_vec();
        if (payload.len() as u64) < bit_count.div_ceil(8) {
            return Err(Error::Truncated(format!(
                "payload holds {} bytes but {bit_count} bits are declared",
                payload.len()
            )));
        }
        Ok(EncodedModel {
            lengths,
            bit_count,
            payload,
        })
    }

    pub fn encoded_len(&self) -> usize {
        TABLE_SIZE + 8 + self.payload.len()
    }
}
