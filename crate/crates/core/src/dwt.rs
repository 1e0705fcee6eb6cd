//! Five-level Daubechies-2 discrete wavelet transform with symmetric
//! (half-point) boundary extension, its inverse, and cubic-spline
//! re-interpolation of every coefficient series to the source length.
//!
//! Analysis at each level is a full linear convolution of the extended
//! signal with the decomposition filter followed by keeping odd output
//! indices, so a level with input length `n` yields `(n + 3) / 2`
//! coefficients. The redundant boundary coefficients make the inverse exact.

use std::io::Write;

use crate::error::{Error, Result};
use crate::spline::NaturalSpline;

pub const LEVELS: usize = 5;
pub const FILTER_LEN: usize = 4;
pub const MIN_SIGNAL_LEN: usize = 32;

/// Orthonormal Db2 filter bank.
#[derive(Debug, Clone, Copy)]
pub struct Db2 {
    pub dec_lo: [f64; FILTER_LEN],
    pub dec_hi: [f64; FILTER_LEN],
    pub rec_lo: [f64; FILTER_LEN],
    pub rec_hi: [f64; FILTER_LEN],
}

impl Db2 {
    pub fn new() -> Self {
        let s3 = 3f64.sqrt();
        let norm = 4.0 * 2f64.sqrt();
        let rec_lo = [
            (1.0 + s3) / norm,
            (3.0 + s3) / norm,
            (3.0 - s3) / norm,
            (1.0 - s3) / norm,
        ];
        let mut rec_hi = [0.0; FILTER_LEN];
        for (k, v) in rec_hi.iter_mut().enumerate() {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * rec_lo[FILTER_LEN - 1 - k];
        }
        let mut dec_lo = rec_lo;
        dec_lo.reverse();
        let mut dec_hi = rec_hi;
        dec_hi.reverse();
        Self {
            dec_lo,
            dec_hi,
            rec_lo,
            rec_hi,
        }
    }
}

impl Default for Db2 {
    fn default() -> Self {
        Self::new()
    }
}

/// Index into a half-point symmetric extension of a length-`n` signal:
/// `x[-1] = x[0]`, `x[n] = x[n-1]`, and so on.
pub fn symmetric_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    let period = 2 * n;
    let mut j = i.rem_euclid(period);
    if j >= n {
        j = period - 1 - j;
    }
    j as usize
}

/// Number of coefficients produced from an input of length `n`.
pub fn coeff_len(n: usize) -> usize {
    (n + FILTER_LEN - 1) / 2
}

/// Input length seen by each of the five levels (index 0 = source length).
pub fn level_input_lens(source_len: usize) -> [usize; LEVELS] {
    let mut lens = [0; LEVELS];
    let mut n = source_len;
    for l in lens.iter_mut() {
        *l = n;
        n = coeff_len(n);
    }
    lens
}

fn analysis(x: &[f64], filter: &[f64; FILTER_LEN]) -> Vec<f64> {
    let n = x.len();
    (0..coeff_len(n))
        .map(|o| {
            let centre = 2 * o as isize + 1;
            filter
                .iter()
                .enumerate()
                .map(|(j, h)| h * x[symmetric_index(centre - j as isize, n)])
                .sum()
        })
        .collect()
}

fn synthesis(approx: &[f64], detail: &[f64], bank: &Db2, out_len: usize) -> Vec<f64> {
    // x[t] = Σ_o a[o]·g_lo[t − 2o + 2] + d[o]·g_hi[t − 2o + 2]
    let mut out = vec![0.0; out_len];
    for (t, slot) in out.iter_mut().enumerate() {
        let t = t as isize;
        let o_lo = (t - 1).div_euclid(2).max(0) as usize;
        let o_hi = ((t + 2) / 2) as usize;
        let mut acc = 0.0;
        for o in o_lo..=o_hi.min(approx.len() - 1) {
            let k = t - 2 * o as isize + 2;
            if (0..FILTER_LEN as isize).contains(&k) {
                acc += approx[o] * bank.rec_lo[k as usize] + detail[o] * bank.rec_hi[k as usize];
            }
        }
        *slot = acc;
    }
    out
}

/// Raw (decimated) five-level decomposition.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    /// cA1..cA5
    pub approx: Vec<Vec<f64>>,
    /// cD1..cD5
    pub detail: Vec<Vec<f64>>,
    pub source_len: usize,
}

impl WaveletDecomposition {
    pub fn zeros(source_len: usize) -> Self {
        let lens = level_input_lens(source_len);
        let approx: Vec<Vec<f64>> = lens.iter().map(|&n| vec![0.0; coeff_len(n)]).collect();
        Self {
            detail: approx.clone(),
            approx,
            source_len,
        }
    }

    fn check_shape(&self) -> Result<()> {
        if self.approx.len() != LEVELS || self.detail.len() != LEVELS {
            return Err(Error::ShapeMismatch(format!(
                "expected {LEVELS} levels, got {}/{}",
                self.approx.len(),
                self.detail.len()
            )));
        }
        for (k, &n) in level_input_lens(self.source_len).iter().enumerate() {
            let want = coeff_len(n);
            if self.approx[k].len() != want || self.detail[k].len() != want {
                return Err(Error::ShapeMismatch(format!(
                    "level {} has {}/{} coefficients, expected {want}",
                    k + 1,
                    self.approx[k].len(),
                    self.detail[k].len()
                )));
            }
        }
        Ok(())
    }

    /// Writes `level,index,value` rows with levels named `cA1`..`cD5`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "level,index,value")?;
        for (prefix, series) in [("cA", &self.approx), ("cD", &self.detail)] {
            for (k, s) in series.iter().enumerate() {
                for (i, v) in s.iter().enumerate() {
                    writeln!(w, "{prefix}{},{i},{v}", k + 1)?;
                }
            }
        }
        Ok(())
    }
}

pub fn dwt5_db2(signal: &[f64]) -> Result<WaveletDecomposition> {
    if signal.len() < MIN_SIGNAL_LEN {
        return Err(Error::SignalTooShort {
            len: signal.len(),
            min: MIN_SIGNAL_LEN,
        });
    }
    if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput(i));
    }
    let bank = Db2::new();
    let mut approx = Vec::with_capacity(LEVELS);
    let mut detail = Vec::with_capacity(LEVELS);
    let mut current = signal.to_vec();
    for _ in 0..LEVELS {
        let a = analysis(&current, &bank.dec_lo);
        detail.push(analysis(&current, &bank.dec_hi));
        current = a.clone();
        approx.push(a);
    }
    Ok(WaveletDecomposition {
        approx,
        detail,
        source_len: signal.len(),
    })
}

/// Inverse of [`dwt5_db2`]. Only cA5 and cD1..cD5 are used; cA1..cA4 are
/// implied by them.
pub fn idwt5_db2(decomp: &WaveletDecomposition) -> Result<Vec<f64>> {
    decomp.check_shape()?;
    let bank = Db2::new();
    let lens = level_input_lens(decomp.source_len);
    let mut current = decomp.approx[LEVELS - 1].clone();
    for k in (0..LEVELS).rev() {
        current = synthesis(&current, &decomp.detail[k], &bank, lens[k]);
    }
    Ok(current)
}

/// Ten coefficient series stretched to the source length, in feature
/// order cA1..cA5 then cD1..cD5.
#[derive(Debug, Clone, PartialEq)]
pub struct InterpolatedDecomposition {
    pub series: Vec<Vec<f64>>,
    pub source_len: usize,
}

impl InterpolatedDecomposition {
    pub fn approx(&self, level: usize) -> &[f64] {
        &self.series[level - 1]
    }

    pub fn detail(&self, level: usize) -> &[f64] {
        &self.series[LEVELS + level - 1]
    }
}

/// Sample position of coefficient `i` at `level`: the centre of its
/// dyadic support, `(i − ½)·2^level + ½`.
pub fn knot_position(i: usize, level: usize) -> f64 {
    let scale = (1usize << level) as f64;
    (i as f64 - 0.5) * scale + 0.5
}

/// Knots (position, value) for one level's series, clamped into
/// `[0, source_len − 1]`. Where several knots clamp onto the same edge only
/// the one originally nearest the edge is kept.
pub fn knots(series: &[f64], level: usize, source_len: usize) -> (Vec<f64>, Vec<f64>) {
    let last = (source_len - 1) as f64;
    let mut xs: Vec<f64> = Vec::with_capacity(series.len());
    let mut ys: Vec<f64> = Vec::with_capacity(series.len());
    for (i, &v) in series.iter().enumerate() {
        let p = knot_position(i, level).clamp(0.0, last);
        match xs.last() {
            // left edge: a later knot is nearer to the edge, replace
            Some(&prev) if prev == p && p == 0.0 => {
                *ys.last_mut().unwrap() = v;
            }
            // right edge: the first clamped knot is the nearest, drop the rest
            Some(&prev) if prev == p => {}
            _ => {
                xs.push(p);
                ys.push(v);
            }
        }
    }
    (xs, ys)
}

/// Stretches one level's series to `source_len` samples.
pub fn stretch(series: &[f64], level: usize, source_len: usize) -> Vec<f64> {
    let (xs, ys) = knots(series, level, source_len);
    let spline = NaturalSpline::new(xs, ys);
    (0..source_len).map(|t| spline.eval(t as f64)).collect()
}

pub fn interpolate_full_length(decomp: &WaveletDecomposition) -> InterpolatedDecomposition {
    let n = decomp.source_len;
    let series = decomp
        .approx
        .iter()
        .chain(decomp.detail.iter())
        .enumerate()
        .map(|(idx, s)| stretch(s, idx % LEVELS + 1, n))
        .collect();
    InterpolatedDecomposition {
        series,
        source_len: n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_signal(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-50.0..50.0)).collect()
    }

    #[test]
    fn filter_bank_is_orthonormal() {
        let b = Db2::new();
        let norm: f64 = b.rec_lo.iter().map(|h| h * h).sum();
        let sum: f64 = b.rec_lo.iter().sum();
        assert!((norm - 1.0).abs() < 1e-15);
        assert!((sum - 2f64.sqrt()).abs() < 1e-15);
        // even-shift orthogonality and lo/hi orthogonality
        let shift2: f64 = b.rec_lo[2] * b.rec_lo[0] + b.rec_lo[3] * b.rec_lo[1];
        assert!(shift2.abs() < 1e-15);
        let cross: f64 = b.rec_lo.iter().zip(&b.rec_hi).map(|(a, c)| a * c).sum();
        assert!(cross.abs() < 1e-15);
        assert!(b.dec_hi.iter().sum::<f64>().abs() < 1e-15);
        // matches the usual published values
        assert!((b.dec_lo[0] + 0.12940952255126037).abs() < 1e-15);
        assert!((b.dec_hi[0] + 0.48296291314453416).abs() < 1e-15);
    }

    #[test]
    fn symmetric_extension_indices() {
        let got: Vec<usize> = (-3..8).map(|i| symmetric_index(i, 5)).collect();
        assert_eq!(got, vec![2, 1, 0, 0, 1, 2, 3, 4, 4, 3, 2]);
    }

    #[test]
    fn coefficient_lengths() {
        let d = dwt5_db2(&vec![1.0; 64]).unwrap();
        let lens: Vec<usize> = d.approx.iter().map(Vec::len).collect();
        assert_eq!(lens, vec![33, 18, 10, 6, 4]);
    }

    #[test]
    fn constant_has_zero_details() {
        for c in [0.0, 1.0, -3.7, 123.456] {
            let d = dwt5_db2(&vec![c; 64]).unwrap();
            for s in &d.detail {
                assert!(s.iter().all(|v| v.abs() <= 1e-12), "c={c}");
            }
        }
    }

    #[test]
    fn impulse_matches_direct_convolution() {
        let mut x = vec![0.0; 64];
        x[8] = 1.0;
        let d = dwt5_db2(&x).unwrap();
        let b = Db2::new();
        // brute force: full convolution of the unextended impulse, odd samples
        for (filter, got) in [(b.dec_lo, &d.approx[0]), (b.dec_hi, &d.detail[0])] {
            let mut full = vec![0.0; 64 + FILTER_LEN - 1];
            for (n, slot) in full.iter_mut().enumerate() {
                for (j, h) in filter.iter().enumerate() {
                    if n >= j && n - j < 64 {
                        *slot += h * x[n - j];
                    }
                }
            }
            let expected: Vec<f64> = full.iter().skip(1).step_by(2).copied().collect();
            assert_eq!(expected.len(), got.len());
            for (e, g) in expected.iter().zip(got.iter()) {
                assert!((e - g).abs() < 1e-15);
            }
            // non-zero taps at o=4 (filter[1]) and o=5 (filter[3])
            assert_eq!(got[4], filter[1]);
            assert_eq!(got[5], filter[3]);
        }
    }

    /// Periodized Db2 analysis, test-only: an orthogonal transform, so it
    /// conserves energy exactly (up to rounding).
    fn periodized_dwt(signal: &[f64], levels: usize) -> Vec<f64> {
        let b = Db2::new();
        let mut out = Vec::new();
        let mut a = signal.to_vec();
        for _ in 0..levels {
            let n = a.len();
            let mut lo = vec![0.0; n / 2];
            let mut hi = vec![0.0; n / 2];
            for o in 0..n / 2 {
                for j in 0..FILTER_LEN {
                    let x = a[(2 * o + j) % n];
                    lo[o] += b.rec_lo[j] * x;
                    hi[o] += b.rec_hi[j] * x;
                }
            }
            out.extend(hi);
            a = lo;
        }
        out.extend(a);
        out
    }

    #[test]
    fn periodized_energy_is_conserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = random_signal(&mut rng, 128);
        let coeffs = periodized_dwt(&x, LEVELS);
        assert_eq!(coeffs.len(), 128);
        let e_in: f64 = x.iter().map(|v| v * v).sum();
        let e_out: f64 = coeffs.iter().map(|v| v * v).sum();
        assert!((e_in - e_out).abs() < 1e-9 * e_in.max(1.0), "{e_in} vs {e_out}");
    }

    #[test]
    fn round_trip_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in [32, 33, 57, 256, 1001] {
            let x = random_signal(&mut rng, n);
            let y = idwt5_db2(&dwt5_db2(&x).unwrap()).unwrap();
            assert_eq!(y.len(), n);
            let err = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-9, "n={n} err={err}");
        }
    }

    #[test]
    fn zero_decomposition_is_zero_signal() {
        let y = idwt5_db2(&WaveletDecomposition::zeros(100)).unwrap();
        assert_eq!(y, vec![0.0; 100]);
    }

    #[test]
    fn ramp_round_trip() {
        let x: Vec<f64> = (0..100).map(f64::from).collect();
        let y = idwt5_db2(&dwt5_db2(&x).unwrap()).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() <= 1e-9);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(dwt5_db2(&[1.0; 31]), Err(Error::SignalTooShort { .. })));
        let mut x = vec![0.0; 40];
        x[5] = f64::INFINITY;
        assert!(matches!(dwt5_db2(&x), Err(Error::NonFiniteInput(5))));
        let mut d = WaveletDecomposition::zeros(64);
        d.detail[2].pop();
        assert!(matches!(idwt5_db2(&d), Err(Error::ShapeMismatch(_))));
    }

    #[test]
    fn interpolation_lengths_and_constants() {
        let d = dwt5_db2(&vec![4.0; 64]).unwrap();
        let interp = interpolate_full_length(&d);
        assert_eq!(interp.series.len(), 10);
        assert!(interp.series.iter().all(|s| s.len() == 64));
        // level-3 approximation of a constant is itself constant
        let c = d.approx[2][5];
        assert!(interp.approx(3).iter().all(|v| (v - c).abs() < 1e-9));
    }

    #[test]
    fn constant_series_stretches_to_constant() {
        let s = vec![2.5; 9];
        assert!(stretch(&s, 3, 64).iter().all(|&v| (v - 2.5).abs() < 1e-12));
    }

    #[test]
    fn two_knot_series_is_monotone() {
        let out = stretch(&[0.0, 1.0], 1, 40);
        assert!(out.windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(out[0], 0.0);
        assert_eq!(*out.last().unwrap(), 1.0);
    }

    #[test]
    fn interpolant_passes_through_knots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_signal(&mut rng, 203);
        let d = dwt5_db2(&x).unwrap();
        for level in 1..=LEVELS {
            let series = &d.detail[level - 1];
            let (xs, ys) = knots(series, level, 203);
            let spline = NaturalSpline::new(xs.clone(), ys.clone());
            for (p, v) in xs.iter().zip(&ys) {
                assert!((spline.eval(*p) - v).abs() < 1e-9);
            }
            // integer knot positions are hit by the sampled output exactly
            let out = stretch(series, level, 203);
            for (p, v) in xs.iter().zip(&ys) {
                if p.fract() == 0.0 {
                    assert!((out[*p as usize] - v).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn edge_knots_are_deduplicated() {
        // level 5 of a 32-sample signal: 3 coefficients at -15.5, 16.5, 48.5
        let (xs, ys) = knots(&[1.0, 2.0, 3.0], 5, 32);
        assert_eq!(xs, vec![0.0, 16.5, 31.0]);
        assert_eq!(ys, vec![1.0, 2.0, 3.0]);
        // level 1: knots at -0.5, 1.5, ...; two clamp onto the right edge
        let (xs, _) = knots(&[0.0; 6], 1, 8);
        assert_eq!(xs, vec![0.0, 1.5, 3.5, 5.5, 7.0]);
    }

    #[test]
    fn coefficient_dump_has_all_rows() {
        let d = dwt5_db2(&vec![1.0; 64]).unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let total: usize = d.approx.iter().chain(&d.detail).map(Vec::len).sum();
        assert_eq!(text.lines().count(), total + 1);
        assert!(text.starts_with("level,index,value\ncA1,0,"));
    }
}
