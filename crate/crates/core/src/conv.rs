//! Zero-extended grid convolutions `out(y) = sum_o data(y - o) s(o)` by direct summation or FFT.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

/// How stencil convolutions are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConvBackend {
    /// Direct summation for small stencils, FFT otherwise.
    #[default]
    Auto,
    /// Direct summation in a fixed offset order; bitwise shift-equivariant in the interior.
    Direct,
    Fft,
}

/// Stencils with at most this many taps are summed directly under [`ConvBackend::Auto`].
const AUTO_DIRECT_TAPS: usize = 40;

/// Sparse stencil: integer offsets (column, row) and weights.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub offsets: Vec<(i64, i64)>,
    pub weights: Vec<f64>,
}

impl Stencil {
    pub fn reach(&self) -> usize {
        self.offsets.iter().map(|&(a, b)| a.unsigned_abs().max(b.unsigned_abs()) as usize).max().unwrap_or(0)
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }
}

/// Convolves one data field against many stencils, caching its spectrum. Shareable across threads.
pub struct Convolver {
    dim: usize,
    n: usize,
    data: Vec<f64>,
    padded: usize,
    backend: ConvBackend,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    spectrum: Option<Vec<Complex64>>,
}

impl Convolver {
    /// `data` holds `n^dim` samples in row-major order; stencil reach must stay below `n`.
    /// The data spectrum is computed up front unless `backend` is [`ConvBackend::Direct`].
    pub fn new(data: Vec<f64>, dim: usize, n: usize, backend: ConvBackend) -> Self {
        debug_assert_eq!(data.len(), n.pow(dim as u32));
        let padded = (2 * n).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(padded);
        let inv = planner.plan_fft_inverse(padded);
        let mut conv = Self { dim, n, data, padded, backend, fwd, inv, spectrum: None };
        if backend != ConvBackend::Direct {
            let mut buf = conv.embed(|buf, l| {
                for (i, &v) in conv.data.iter().enumerate() {
                    buf[conv.padded_index(i, l)] = Complex64::new(v, 0.0);
                }
            });
            conv.transform(&mut buf, false);
            conv.spectrum = Some(buf);
        }
        conv
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn use_fft(&self, stencil: &Stencil) -> bool {
        match self.backend {
            ConvBackend::Direct => false,
            ConvBackend::Fft => true,
            ConvBackend::Auto => stencil.len() > AUTO_DIRECT_TAPS,
        }
    }

    pub fn apply(&self, stencil: &Stencil) -> Vec<f64> {
        if self.use_fft(stencil) {
            self.fft_pair(stencil, None).0
        } else {
            direct(&self.data, self.dim, self.n, stencil)
        }
    }

    /// Two convolutions at once; through the FFT they share one complex transform pair.
    pub fn apply_pair(&self, a: &Stencil, b: &Stencil) -> (Vec<f64>, Vec<f64>) {
        if self.use_fft(a) || self.use_fft(b) {
            let (x, y) = self.fft_pair(a, Some(b));
            (x, y.expect("paired output"))
        } else {
            (direct(&self.data, self.dim, self.n, a), direct(&self.data, self.dim, self.n, b))
        }
    }

    fn fft_pair(&self, a: &Stencil, b: Option<&Stencil>) -> (Vec<f64>, Option<Vec<f64>>) {
        assert!(a.reach() < self.n && b.map_or(0, |s| s.reach()) < self.n, "stencil reach exceeds grid");
        let l = self.padded;
        let wrap = |o: i64| o.rem_euclid(l as i64) as usize;
        let mut kern = self.embed(|buf, l| {
            for (&(dx, dy), &w) in a.offsets.iter().zip(&a.weights) {
                buf[wrap(dy) * if self.dim == 2 { l } else { 0 } + wrap(dx)].re += w;
            }
            if let Some(b) = b {
                for (&(dx, dy), &w) in b.offsets.iter().zip(&b.weights) {
                    buf[wrap(dy) * if self.dim == 2 { l } else { 0 } + wrap(dx)].im += w;
                }
            }
        });
        self.transform(&mut kern, false);
        let spec = self.spectrum.as_ref().expect("spectrum");
        for (k, s) in kern.iter_mut().zip(spec) {
            *k *= *s;
        }
        self.transform(&mut kern, true);
        let scale = 1.0 / (l.pow(self.dim as u32) as f64);
        let len = self.data.len();
        let re = (0..len).map(|i| kern[self.padded_index(i, l)].re * scale).collect();
        let im = b.map(|_| (0..len).map(|i| kern[self.padded_index(i, l)].im * scale).collect());
        (re, im)
    }

    fn padded_index(&self, i: usize, l: usize) -> usize {
        if self.dim == 1 {
            i
        } else {
            (i / self.n) * l + i % self.n
        }
    }

    fn embed(&self, fill: impl FnOnce(&mut [Complex64], usize)) -> Vec<Complex64> {
        let l = self.padded;
        let mut buf = vec![Complex64::new(0.0, 0.0); l.pow(self.dim as u32)];
        fill(&mut buf, l);
        buf
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inv } else { &self.fwd };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(buf, &mut scratch);
        if self.dim == 2 {
            let l = self.padded;
            transpose(buf, l);
            plan.process_with_scratch(buf, &mut scratch);
            transpose(buf, l);
        }
    }
}

fn transpose(buf: &mut [Complex64], l: usize) {
    for r in 0..l {
        for c in r + 1..l {
            buf.swap(r * l + c, c * l + r);
        }
    }
}

/// Direct summation; every output node visits the stencil taps in the same order.
pub fn direct(data: &[f64], dim: usize, n: usize, stencil: &Stencil) -> Vec<f64> {
    let ni = n as i64;
    let mut out = vec![0.0; data.len()];
    if dim == 1 {
        for (y, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (&(dx, _), &w) in stencil.offsets.iter().zip(&stencil.weights) {
                let src = y as i64 - dx;
                if (0..ni).contains(&src) {
                    acc += data[src as usize] * w;
                }
            }
            *o = acc;
        }
    } else {
        for (idx, o) in out.iter_mut().enumerate() {
            let (col, row) = ((idx % n) as i64, (idx / n) as i64);
            let mut acc = 0.0;
            for (&(dx, dy), &w) in stencil.offsets.iter().zip(&stencil.weights) {
                let (c, r) = (col - dx, row - dy);
                if (0..ni).contains(&c) && (0..ni).contains(&r) {
                    acc += data[(r * ni + c) as usize] * w;
                }
            }
            *o = acc;
        }
    }
    out
}
