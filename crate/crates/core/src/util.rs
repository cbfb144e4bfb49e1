/// FNV-1a, used for dataset and split fingerprints in reports and model files.
#[derive(Clone, Copy)]
pub(crate) struct Fingerprint(u64);

impl Fingerprint {
    pub fn new() -> Self {
        Fingerprint(0xcbf2_9ce4_8422_2325)
    }

    pub fn bytes(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn u32(&mut self, v: u32) {
        self.bytes(&v.to_le_bytes());
    }

    pub fn f64(&mut self, v: f64) {
        self.bytes(&v.to_bits().to_le_bytes());
    }

    pub fn finish(self) -> u64 {
        self.0
    }
}

/// Floor of `fraction * count` that tolerates representation error such as
/// `0.29 * 100 = 28.999999999999996`.
pub(crate) fn floor_fraction(fraction: f64, count: usize) -> usize {
    (fraction * count as f64 + 1e-9).floor() as usize
}
