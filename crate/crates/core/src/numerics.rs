//! Scalar helpers shared across the crate: compensated summation for the
//! wide-dynamic-range quadratic forms, and dB/linear unit conversions.

use num_complex::Complex64;

/// Kahan-Babuška compensated accumulator.
///
/// Noise powers near -100 dBm and transmit powers near +30 dBm coexist in the
/// same sums; plain accumulation loses the small terms first.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: f64) {
        let t = self.sum + value;
        if self.sum.abs() >= value.abs() {
            self.comp += (self.sum - t) + value;
        } else {
            self.comp += (value - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Compensated sum of an iterator of reals.
pub fn ksum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut acc = KahanSum::new();
    for v in values {
        acc.add(v);
    }
    acc.value()
}

/// Conjugating inner product `a^H b` over element iterators with compensated
/// accumulation of the real and imaginary parts.
pub fn cdotc_parts<'a, 'b, I, J>(a: I, b: J) -> Complex64
where
    I: IntoIterator<Item = &'a Complex64>,
    J: IntoIterator<Item = &'b Complex64>,
{
    let mut re = KahanSum::new();
    let mut im = KahanSum::new();
    for (x, y) in a.into_iter().zip(b) {
        let p = x.conj() * y;
        re.add(p.re);
        im.add(p.im);
    }
    Complex64::new(re.value(), im.value())
}

/// Conjugating inner product `a^H b` of two slices.
pub fn cdotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    debug_assert_eq!(a.len(), b.len());
    cdotc_parts(a, b)
}

/// Power ratio in dB to linear scale.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Linear power ratio to dB. Zero maps to negative infinity.
pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// dBm to linear milliwatts.
pub fn dbm_to_mw(dbm: f64) -> f64 {
    db_to_linear(dbm)
}

pub fn deg_to_rad(deg: f64) -> f64 {
    deg.to_radians()
}
