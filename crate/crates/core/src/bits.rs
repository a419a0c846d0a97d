//! Fixed-length bit strings used as basis labels.
//!
//! Bit `i` of the string lives in word `i / 64` at position `i % 64`. Bits
//! past `len` are always zero, so derived equality and ordering are exact.

use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct BitString {
    len: usize,
    words: Vec<u64>,
}

fn words_for(len: usize) -> usize {
    len.div_ceil(64)
}

impl BitString {
    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            words: vec![0; words_for(len)],
        }
    }

    pub fn from_u64(value: u64, len: usize) -> Self {
        let mut b = Self::zeros(len);
        if len > 0 {
            b.set_u64(0, len.min(64), value);
        }
        b
    }

    /// Bytes little-endian: byte `j` supplies bits `8j..8j+8`.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Self {
        let mut b = Self::zeros(len);
        for i in 0..len {
            if (bytes[i / 8] >> (i % 8)) & 1 == 1 {
                b.set(i, true);
            }
        }
        b
    }

    /// Parse a string of `0`/`1`, most significant (highest index) bit first.
    pub fn from_str_msb(s: &str) -> Option<Self> {
        let len = s.len();
        let mut b = Self::zeros(len);
        for (k, ch) in s.chars().enumerate() {
            match ch {
                '0' => {}
                '1' => b.set(len - 1 - k, true),
                _ => return None,
            }
        }
        Some(b)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn get(&self, i: usize) -> bool {
        debug_assert!(i < self.len);
        (self.words[i / 64] >> (i % 64)) & 1 == 1
    }

    pub fn set(&mut self, i: usize, v: bool) {
        debug_assert!(i < self.len);
        let m = 1u64 << (i % 64);
        if v {
            self.words[i / 64] |= m;
        } else {
            self.words[i / 64] &= !m;
        }
    }

    pub fn flip(&mut self, i: usize) {
        self.words[i / 64] ^= 1u64 << (i % 64);
    }

    /// Read `width <= 64` bits starting at `offset`.
    pub fn get_u64(&self, offset: usize, width: usize) -> u64 {
        debug_assert!(width <= 64 && offset + width <= self.len);
        if width == 0 {
            return 0;
        }
        let w = offset / 64;
        let s = offset % 64;
        let mut v = self.words[w] >> s;
        if s + width > 64 {
            v |= self.words[w + 1] << (64 - s);
        }
        if width < 64 {
            v &= (1u64 << width) - 1;
        }
        v
    }

    /// Overwrite `width <= 64` bits starting at `offset`.
    pub fn set_u64(&mut self, offset: usize, width: usize, value: u64) {
        debug_assert!(width <= 64 && offset + width <= self.len);
        if width == 0 {
            return;
        }
        let mask = if width == 64 { u64::MAX } else { (1u64 << width) - 1 };
        let value = value & mask;
        let w = offset / 64;
        let s = offset % 64;
        self.words[w] = (self.words[w] & !(mask << s)) | (value << s);
        if s + width > 64 {
            let hi = width - (64 - s);
            let hmask = (1u64 << hi) - 1;
            self.words[w + 1] = (self.words[w + 1] & !hmask) | (value >> (64 - s));
        }
    }

    pub fn xor_u64(&mut self, offset: usize, width: usize, value: u64) {
        let cur = self.get_u64(offset, width);
        self.set_u64(offset, width, cur ^ value);
    }

    /// Copy out `width` bits at `offset` as little-endian bytes.
    pub fn get_bytes(&self, offset: usize, width: usize) -> Vec<u8> {
        let mut out = vec![0u8; width.div_ceil(8)];
        let mut done = 0;
        while done < width {
            let w = (width - done).min(64);
            let v = self.get_u64(offset + done, w);
            for k in 0..w.div_ceil(8) {
                out[done / 8 + k] = (v >> (8 * k)) as u8;
            }
            done += w;
        }
        out
    }

    pub fn set_bytes(&mut self, offset: usize, width: usize, bytes: &[u8]) {
        let mut done = 0;
        while done < width {
            let w = (width - done).min(64);
            let mut v = 0u64;
            for k in 0..w.div_ceil(8) {
                v |= (*bytes.get(done / 8 + k).unwrap_or(&0) as u64) << (8 * k);
            }
            self.set_u64(offset + done, w, v);
            done += w;
        }
    }

    pub fn xor_bytes(&mut self, offset: usize, width: usize, bytes: &[u8]) {
        let mut done = 0;
        while done < width {
            let w = (width - done).min(64);
            let mut v = 0u64;
            for k in 0..w.div_ceil(8) {
                v |= (*bytes.get(done / 8 + k).unwrap_or(&0) as u64) << (8 * k);
            }
            self.xor_u64(offset + done, w, v);
            done += w;
        }
    }

    pub fn is_zero_range(&self, offset: usize, width: usize) -> bool {
        let mut done = 0;
        while done < width {
            let w = (width - done).min(64);
            if self.get_u64(offset + done, w) != 0 {
                return false;
            }
            done += w;
        }
        true
    }

    pub fn extract(&self, offset: usize, width: usize) -> BitString {
        let mut out = BitString::zeros(width);
        let mut done = 0;
        while done < width {
            let w = (width - done).min(64);
            out.set_u64(done, w, self.get_u64(offset + done, w));
            done += w;
        }
        out
    }

    /// `self` in the low bits, `hi` above it.
    pub fn concat(&self, hi: &BitString) -> BitString {
        let mut out = self.resized(self.len + hi.len);
        let mut done = 0;
        while done < hi.len {
            let w = (hi.len - done).min(64);
            out.set_u64(self.len + done, w, hi.get_u64(done, w));
            done += w;
        }
        out
    }

    /// Grow with zero high bits, or truncate.
    pub fn resized(&self, len: usize) -> BitString {
        let mut words = self.words.clone();
        words.resize(words_for(len), 0);
        let mut out = BitString { len, words };
        if len < self.len && !len.is_multiple_of(64) {
            let last = out.words.len() - 1;
            out.words[last] &= (1u64 << (len % 64)) - 1;
        }
        out
    }

    pub fn remove_range(&self, offset: usize, width: usize) -> BitString {
        let lo = self.extract(0, offset);
        let hi = self.extract(offset + width, self.len - offset - width);
        lo.concat(&hi)
    }

    pub fn xor(&self, other: &BitString) -> BitString {
        assert_eq!(self.len, other.len);
        BitString {
            len: self.len,
            words: self.words.iter().zip(&other.words).map(|(a, b)| a ^ b).collect(),
        }
    }

    pub fn and_popcount(&self, other: &BitString) -> u32 {
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones())
            .sum()
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.get_bytes(0, self.len)
    }

    /// Integer value; only meaningful for `len <= 64`.
    pub fn to_u64(&self) -> u64 {
        self.get_u64(0, self.len.min(64))
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in (0..self.len).rev() {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn msb_string_roundtrip() {
        let b = BitString::from_str_msb("0110").unwrap();
        assert_eq!(b.to_u64(), 6);
        assert_eq!(b.to_string(), "0110");
        assert!(BitString::from_str_msb("01x").is_none());
    }

    proptest! {
        #[test]
        fn chunk_ops_match_bitwise(bits in proptest::collection::vec(any::<bool>(), 1..200),
                                   off in 0usize..200, width in 0usize..70, val in any::<u64>()) {
            let len = bits.len();
            let mut b = BitString::zeros(len);
            for (i, &v) in bits.iter().enumerate() { b.set(i, v); }
            let off = off % len;
            let width = width.min(64).min(len - off);
            let got = b.get_u64(off, width);
            let mut want = 0u64;
            for k in 0..width { if bits[off + k] { want |= 1 << k; } }
            prop_assert_eq!(got, want);

            let mut c = b.clone();
            c.set_u64(off, width, val);
            for (i, &bit) in bits.iter().enumerate() {
                let expect = if i >= off && i < off + width { (val >> (i - off)) & 1 == 1 } else { bit };
                prop_assert_eq!(c.get(i), expect);
            }

            let removed = b.remove_range(off, width);
            prop_assert_eq!(removed.len(), len - width);
            let kept: Vec<bool> = bits.iter().enumerate().filter(|(i, _)| *i < off || *i >= off + width).map(|(_, v)| *v).collect();
            for (i, v) in kept.iter().enumerate() { prop_assert_eq!(removed.get(i), *v); }

            let bytes = b.get_bytes(off, width);
            let mut d = BitString::zeros(len);
            d.set_bytes(off, width, &bytes);
            prop_assert_eq!(d.extract(off, width), b.extract(off, width));
        }
    }
}
