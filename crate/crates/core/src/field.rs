//! Matrix-valued fields on a torus.
//!
//! A [`MatrixField`] is an `r × r` complex matrix at every point, stored as
//! samples of a trigonometric polynomial. Each field records the largest
//! Fourier mode it may contain along every axis (its *band*) and is sampled
//! on a grid at least as fine as the torus base grid.
//!
//! With dealiasing on, pointwise products are formed on a zero-padded grid
//! of `2·band + 2` points per axis, so products of band-limited fields are
//! represented exactly and every algebraic identity between differential
//! operators holds to round-off. With dealiasing off everything stays on
//! the base grid and products alias.

use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{TorusGeometry, MAX_AXES};
use crate::par;
use crate::spectral::{fft_nd, fft_nd_banded, is_nyquist, mode_index, signed_mode, strides, unravel};

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug)]
pub struct MatrixField {
    geom: Arc<TorusGeometry>,
    rank: usize,
    shape: Vec<usize>,
    band: Vec<usize>,
    /// `rank²` row-major planes (entry `(i, j)` is plane `i·rank + j`),
    /// each a row-major sample array over `shape`.
    data: Vec<C64>,
    /// Normalized spectrum of `data`, filled on first use.
    spec: OnceLock<Arc<Vec<C64>>>,
    /// Spectrum valid only inside the recorded mode box.
    pruned: Mutex<Option<(Vec<usize>, Arc<Vec<C64>>)>>,
    /// The most recent exact resampling onto a finer grid.
    lift: Mutex<Option<Arc<MatrixField>>>,
}

impl Clone for MatrixField {
    fn clone(&self) -> Self {
        Self {
            geom: self.geom.clone(),
            rank: self.rank,
            shape: self.shape.clone(),
            band: self.band.clone(),
            data: self.data.clone(),
            spec: self.spec.clone(),
            pruned: Mutex::new(self.pruned.lock().expect("cache lock").clone()),
            lift: Mutex::new(self.lift.lock().expect("cache lock").clone()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Pointwise {
    Product,
    Commutator,
    /// `Tr(a b^*)`, rank-1 result.
    HermPair,
}

impl MatrixField {
    fn raw(geom: Arc<TorusGeometry>, rank: usize, shape: Vec<usize>, band: Vec<usize>, data: Vec<C64>) -> Self {
        Self { geom, rank, shape, band, data, spec: OnceLock::new(), pruned: Mutex::new(None), lift: Mutex::new(None) }
    }

    pub fn zeros(geom: &Arc<TorusGeometry>, rank: usize) -> Self {
        let shape = geom.dims().to_vec();
        let npts: usize = shape.iter().product();
        Self::raw(geom.clone(), rank, shape.clone(), vec![0; shape.len()], vec![ZERO; npts * rank * rank])
    }

    /// Spatially constant field with row-major matrix `mat`.
    pub fn constant(geom: &Arc<TorusGeometry>, rank: usize, mat: &[C64]) -> Self {
        assert_eq!(mat.len(), rank * rank, "constant matrix has wrong size");
        let mut f = Self::zeros(geom, rank);
        let npts = f.npoints();
        for (e, &v) in mat.iter().enumerate() {
            f.data[e * npts..(e + 1) * npts].fill(v);
        }
        f
    }

    pub fn identity(geom: &Arc<TorusGeometry>, rank: usize) -> Self {
        let mut mat = vec![ZERO; rank * rank];
        for i in 0..rank {
            mat[i * rank + i] = ONE;
        }
        Self::constant(geom, rank, &mat)
    }

    /// Samples `f(x, out)` (row-major matrix into `out`) at the grid points
    /// of a grid fine enough for `band`. The caller vouches that `f` is a
    /// trigonometric polynomial within `band`.
    pub fn from_fn<F>(geom: &Arc<TorusGeometry>, rank: usize, band: Vec<usize>, f: F) -> Self
    where
        F: Fn(&[f64], &mut [C64]) + Sync + Send,
    {
        assert_eq!(band.len(), geom.n_axes());
        let shape = shape_for_band(geom, &band);
        let npts: usize = shape.iter().product();
        let rr = rank * rank;
        let mut pointwise = vec![ZERO; npts * rr];
        let l = geom.period();
        par::for_each_chunk_mut(&mut pointwise, rr, |pt, out| {
            let mut idx = [0usize; MAX_AXES];
            unravel(pt, &shape, &mut idx[..shape.len()]);
            let mut x = [0.0f64; MAX_AXES];
            for a in 0..shape.len() {
                x[a] = idx[a] as f64 * l / shape[a] as f64;
            }
            f(&x[..shape.len()], out);
        });
        let mut data = vec![ZERO; npts * rr];
        for e in 0..rr {
            par::fill_indexed(&mut data[e * npts..(e + 1) * npts], |pt| pointwise[pt * rr + e]);
        }
        Self::raw(geom.clone(), rank, shape, band, data)
    }

    /// Builds `Σ_k c(k, entry) e^{i k·x 2π/L}` over the mode box `|k_a| ≤ band_a`.
    pub fn from_modes<F>(geom: &Arc<TorusGeometry>, rank: usize, band: Vec<usize>, coeff: F) -> Self
    where
        F: FnMut(&[i64], usize) -> C64,
    {
        let mut coeff = coeff;
        assert_eq!(band.len(), geom.n_axes());
        let shape = shape_for_band(geom, &band);
        let npts: usize = shape.iter().product();
        let st = strides(&shape);
        let rr = rank * rank;
        let mut data = vec![ZERO; npts * rr];
        let widths: Vec<usize> = band.iter().map(|b| 2 * b + 1).collect();
        let nbox: usize = widths.iter().product();
        let mut off = [0usize; MAX_AXES];
        let mut k = [0i64; MAX_AXES];
        let d = shape.len();
        for b in 0..nbox {
            unravel(b, &widths, &mut off[..d]);
            let mut idx = 0;
            for a in 0..d {
                k[a] = off[a] as i64 - band[a] as i64;
                idx += mode_index(k[a], shape[a]) * st[a];
            }
            for e in 0..rr {
                data[e * npts + idx] = coeff(&k[..d], e);
            }
        }
        for e in 0..rr {
            fft_nd(&mut data[e * npts..(e + 1) * npts], &shape, true);
        }
        Self::raw(geom.clone(), rank, shape, band, data)
    }

    /// Field from base-grid samples, one plane per matrix entry (row-major).
    ///
    /// The band is read off the spectrum: modes below `1e-14` of the largest
    /// count as round-off. Samples are kept verbatim unless the Nyquist
    /// modes carry real content, in which case they are projected away.
    pub fn from_base_samples(geom: &Arc<TorusGeometry>, rank: usize, planes: Vec<C64>) -> Self {
        let shape = geom.dims().to_vec();
        let npts: usize = shape.iter().product();
        assert_eq!(planes.len(), npts * rank * rank, "sample count");
        let nyquist: Vec<usize> = shape.iter().map(|d| d / 2).collect();
        let probe = Self::raw(geom.clone(), rank, shape.clone(), nyquist, planes);
        let spec = probe.spectrum_ref();
        let floor = 1e-14 * spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let mut band = vec![0usize; shape.len()];
        let mut idx = [0usize; MAX_AXES];
        for (i, c) in spec.iter().enumerate() {
            if c.norm() > floor {
                unravel(i % npts, &shape, &mut idx[..shape.len()]);
                for a in 0..shape.len() {
                    let k = idx[a].min(shape[a] - idx[a]);
                    band[a] = band[a].max(k);
                }
            }
        }
        if band.iter().zip(&shape).any(|(b, d)| 2 * b >= *d) {
            return probe.resample_with_band(&shape, &geom.base_band());
        }
        Self::raw(geom.clone(), rank, shape, band, probe.data)
    }

    pub fn geom(&self) -> &Arc<TorusGeometry> {
        &self.geom
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn band(&self) -> &[usize] {
        &self.band
    }

    pub fn npoints(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn plane(&self, i: usize, j: usize) -> &[C64] {
        let n = self.npoints();
        let e = i * self.rank + j;
        &self.data[e * n..(e + 1) * n]
    }

    /// Row-major matrix at grid point `pt`.
    pub fn matrix_at(&self, pt: usize) -> Vec<C64> {
        let n = self.npoints();
        (0..self.rank * self.rank).map(|e| self.data[e * n + pt]).collect()
    }

    /// Normalized Fourier coefficients of every plane on the current grid.
    pub fn spectrum(&self) -> Vec<C64> {
        self.spectrum_ref().to_vec()
    }

    fn spectrum_ref(&self) -> &[C64] {
        self.spec.get_or_init(|| {
            let npts = self.npoints();
            let mut spec = self.data.clone();
            let scale = 1.0 / npts as f64;
            for plane in spec.chunks_mut(npts) {
                fft_nd(plane, &self.shape, false);
                for v in plane.iter_mut() {
                    *v *= scale;
                }
            }
            Arc::new(spec)
        })
    }

    fn pruned_spectrum(&self, hw: &[usize]) -> Arc<Vec<C64>> {
        let mut cache = self.pruned.lock().expect("cache lock");
        if let Some((box_, sp)) = cache.as_ref() {
            if box_.iter().zip(hw).all(|(b, h)| b >= h) {
                return sp.clone();
            }
        }
        let npts = self.npoints();
        let scale = 1.0 / npts as f64;
        let mut spec = self.data.clone();
        for plane in spec.chunks_mut(npts) {
            fft_nd_banded(plane, &self.shape, false, Some(hw));
            for v in plane.iter_mut() {
                *v *= scale;
            }
        }
        let spec = Arc::new(spec);
        *cache = Some((hw.to_vec(), spec.clone()));
        spec
    }

    /// Exact resampling onto the finer grid `shape`, cached; `None` when
    /// `shape` is already the current grid.
    fn lifted(&self, shape: &[usize]) -> Option<Arc<MatrixField>> {
        if shape == self.shape.as_slice() {
            return None;
        }
        if let Some(l) = self.lift.lock().expect("cache lock").as_ref() {
            if l.shape == shape {
                return Some(l.clone());
            }
        }
        let l = Arc::new(self.resample(shape));
        if l.band == self.band {
            *self.lift.lock().expect("cache lock") = Some(l.clone());
        }
        Some(l)
    }

    fn from_spectrum(&self, shape: Vec<usize>, band: Vec<usize>, spec: Vec<C64>) -> Self {
        let npts: usize = shape.iter().product();
        let mut data = spec.clone();
        for plane in data.chunks_mut(npts) {
            fft_nd_banded(plane, &shape, true, Some(&band));
        }
        let out = Self::raw(self.geom.clone(), self.rank, shape, band, data);
        let _ = out.spec.set(Arc::new(spec));
        out
    }

    fn is_constant(&self) -> bool {
        self.band.iter().all(|b| *b == 0)
    }

    /// Copies modes `|k_a| ≤ hw_a` onto a grid of `shape`, multiplying each
    /// by `mult(k)`.
    fn place_modes(&self, shape: &[usize], hw: Vec<usize>, mult: Option<&dyn Fn(&[i64]) -> C64>) -> Self {
        let d = self.shape.len();
        // A truncation whose source spectrum is not cached only needs the
        // retained modes.
        let truncating = hw.iter().zip(&self.band).any(|(h, b)| h < b);
        let spec_arc: Arc<Vec<C64>> = match self.spec.get() {
            Some(sp) => sp.clone(),
            None if truncating => self.pruned_spectrum(&hw),
            None => {
                self.spectrum_ref();
                self.spec.get().expect("just filled").clone()
            }
        };
        let old: &[C64] = &spec_arc;
        let npts_old = self.npoints();
        let npts_new: usize = shape.iter().product();
        let st_old = strides(&self.shape);
        let st_new = strides(shape);
        let widths: Vec<usize> = hw.iter().map(|b| 2 * b + 1).collect();
        let nbox: usize = widths.iter().product();
        let mut map = Vec::with_capacity(nbox);
        let mut off = [0usize; MAX_AXES];
        let mut k = [0i64; MAX_AXES];
        for b in 0..nbox {
            unravel(b, &widths, &mut off[..d]);
            let (mut src, mut dst) = (0, 0);
            for a in 0..d {
                k[a] = off[a] as i64 - hw[a] as i64;
                src += mode_index(k[a], self.shape[a]) * st_old[a];
                dst += mode_index(k[a], shape[a]) * st_new[a];
            }
            let f = mult.map_or(ONE, |m| m(&k[..d]));
            map.push((src, dst, f));
        }
        let mut spec = vec![ZERO; npts_new * self.rank * self.rank];
        for e in 0..self.rank * self.rank {
            for &(src, dst, f) in &map {
                spec[e * npts_new + dst] = old[e * npts_old + src] * f;
            }
        }
        self.from_spectrum(shape.to_vec(), hw, spec)
    }

    /// Re-samples onto `shape`, keeping at most modes `|k_a| ≤ cap_a`.
    pub fn resample_with_band(&self, shape: &[usize], cap: &[usize]) -> Self {
        let hw: Vec<usize> = (0..self.shape.len())
            .map(|a| {
                self.band[a]
                    .min(cap[a])
                    .min(self.shape[a] / 2 - 1)
                    .min(shape[a] / 2 - 1)
            })
            .collect();
        if shape == self.shape.as_slice() && hw == self.band {
            return self.clone();
        }
        if self.is_constant() {
            let n_old = self.npoints();
            let n_new: usize = shape.iter().product();
            let mut data = vec![ZERO; n_new * self.rank * self.rank];
            for (e, plane) in data.chunks_mut(n_new).enumerate() {
                plane.fill(self.data[e * n_old]);
            }
            return Self::raw(self.geom.clone(), self.rank, shape.to_vec(), hw, data);
        }
        self.place_modes(shape, hw, None)
    }

    pub fn resample(&self, shape: &[usize]) -> Self {
        self.resample_with_band(shape, &self.band.clone())
    }

    /// Galerkin projection onto the base grid.
    pub fn project_to_base(&self) -> Self {
        let base = self.geom.base_band();
        self.resample_with_band(self.geom.dims(), &base)
    }

    /// Truncates to modes `|k_a| ≤ cap_a` on the coarsest admissible grid.
    pub fn truncate_band(&self, cap: &[usize]) -> Self {
        let band: Vec<usize> = self.band.iter().zip(cap).map(|(b, c)| (*b).min(*c)).collect();
        let shape = shape_for_band(&self.geom, &band);
        self.resample_with_band(&shape, &band)
    }

    fn check_compatible(&self, other: &Self) {
        assert!(
            Arc::ptr_eq(&self.geom, &other.geom) || self.geom == other.geom,
            "fields live on different tori"
        );
        assert_eq!(self.rank, other.rank, "rank mismatch");
    }

    fn common_shape(&self, other: &Self) -> Vec<usize> {
        self.shape.iter().zip(&other.shape).map(|(a, b)| *a.max(b)).collect()
    }

    fn zip_with<F>(&self, other: &Self, f: F) -> Self
    where
        F: Fn(C64, C64) -> C64 + Sync + Send,
    {
        self.check_compatible(other);
        let shape = self.common_shape(other);
        let a = self.resample(&shape);
        let b = other.resample(&shape);
        let band = self.band.iter().zip(&other.band).map(|(x, y)| *x.max(y)).collect();
        let data = par::collect_indexed(a.data.len(), |i| f(a.data[i], b.data[i]));
        Self::raw(self.geom.clone(), self.rank, shape, band, data)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x + y)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_with(other, |x, y| x - y)
    }

    pub fn scale(&self, c: C64) -> Self {
        let data = par::collect_indexed(self.data.len(), |i| self.data[i] * c);
        let out = Self::raw(self.geom.clone(), self.rank, self.shape.clone(), self.band.clone(), data);
        if let Some(sp) = self.spec.get() {
            let _ = out.spec.set(Arc::new(sp.iter().map(|v| v * c).collect()));
        }
        if let Some(l) = self.lift.lock().expect("cache lock").as_ref() {
            *out.lift.lock().expect("cache lock") = Some(Arc::new(l.scale(c)));
        }
        out
    }

    pub fn scale_re(&self, c: f64) -> Self {
        self.scale(C64::new(c, 0.0))
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: C64, other: &Self) -> Self {
        self.zip_with(other, move |x, y| x + c * y)
    }

    /// Pointwise conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::raw(self.geom.clone(), self.rank, self.shape.clone(), self.band.clone(), self.data.clone());
        let n = self.npoints();
        let r = self.rank;
        for i in 0..r {
            for j in 0..r {
                let src = &self.data[(j * r + i) * n..(j * r + i + 1) * n];
                par::fill_indexed(&mut out.data[(i * r + j) * n..(i * r + j + 1) * n], |p| src[p].conj());
            }
        }
        if let Some(l) = self.lift.lock().expect("cache lock").as_ref() {
            *out.lift.lock().expect("cache lock") = Some(Arc::new(l.adjoint()));
        }
        out
    }

    /// Pointwise trace as a rank-1 field.
    pub fn trace(&self) -> Self {
        let n = self.npoints();
        let r = self.rank;
        let mut data = vec![ZERO; n];
        par::fill_indexed(&mut data, |p| (0..r).map(|i| self.data[(i * r + i) * n + p]).sum());
        Self::raw(self.geom.clone(), 1, self.shape.clone(), self.band.clone(), data)
    }

    /// Grid and band on which the product of `self` and `other` is formed,
    /// and the band it is finally truncated to.
    fn product_layout(&self, other: &Self, cap: Option<&[usize]>) -> (Vec<usize>, Vec<usize>, Vec<usize>) {
        let g = &self.geom;
        let base = g.dims();
        let d = base.len();
        let mut compute = Vec::with_capacity(d);
        let mut full = Vec::with_capacity(d);
        let mut keep = Vec::with_capacity(d);
        for a in 0..d {
            let b = self.band[a] + other.band[a];
            if !g.dealias() {
                compute.push(base[a]);
                full.push(b.min(base[a] / 2));
                keep.push(b.min(base[a] / 2));
                continue;
            }
            let c = cap.map_or(b, |c| c[a].min(b));
            // Modes above `c` may alias, but only onto modes that are dropped.
            let m = if c < b { even_ceil(b + c + 1) } else { 2 * b + 2 };
            compute.push(base[a].max(m));
            full.push(b);
            keep.push(c);
        }
        (compute, full, keep)
    }

    fn pointwise(&self, other: &Self, op: Pointwise, cap: Option<&[usize]>) -> Self {
        self.check_compatible(other);
        let (compute, full, keep) = self.product_layout(other, cap);
        let (la, lb) = (self.lifted(&compute), other.lifted(&compute));
        let a = la.as_deref().unwrap_or(self);
        let b = lb.as_deref().unwrap_or(other);
        let n: usize = compute.iter().product();
        let r = self.rank;
        let out_rank = if op == Pointwise::HermPair { 1 } else { r };
        let mut data = vec![ZERO; n * out_rank * out_rank];
        fn plane(f: &MatrixField, r: usize, n: usize, i: usize, j: usize) -> &[C64] {
            let e = i * r + j;
            &f.data[e * n..(e + 1) * n]
        }
        match op {
            Pointwise::Product | Pointwise::Commutator => {
                for i in 0..r {
                    for j in 0..r {
                        let out = &mut data[(i * r + j) * n..(i * r + j + 1) * n];
                        let lhs: Vec<(&[C64], &[C64])> =
                            (0..r).map(|k| (plane(a, r, n, i, k), plane(b, r, n, k, j))).collect();
                        let rhs: Vec<(&[C64], &[C64])> = if op == Pointwise::Commutator {
                            (0..r).map(|k| (plane(b, r, n, i, k), plane(a, r, n, k, j))).collect()
                        } else {
                            Vec::new()
                        };
                        par::fill_indexed(out, |p| {
                            let mut acc = ZERO;
                            for (x, y) in &lhs {
                                acc += x[p] * y[p];
                            }
                            for (x, y) in &rhs {
                                acc -= x[p] * y[p];
                            }
                            acc
                        });
                    }
                }
            }
            Pointwise::HermPair => {
                par::fill_indexed(&mut data, |p| {
                    let mut acc = ZERO;
                    for e in 0..r * r {
                        acc += a.data[e * n + p] * b.data[e * n + p].conj();
                    }
                    acc
                });
            }
        }
        let out = Self::raw(self.geom.clone(), out_rank, compute, full, data);
        if keep != out.band {
            out.truncate_band(&keep)
        } else {
            out
        }
    }

    /// Pointwise matrix product `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        self.pointwise(other, Pointwise::Product, None)
    }

    /// Pointwise commutator `[self, other]`.
    pub fn commutator(&self, other: &Self) -> Self {
        self.pointwise(other, Pointwise::Commutator, None)
    }

    /// Commutator whose result is truncated to modes `|k_a| ≤ cap_a`. The
    /// retained modes are exact.
    pub fn commutator_capped(&self, other: &Self, cap: &[usize]) -> Self {
        self.pointwise(other, Pointwise::Commutator, Some(cap))
    }

    /// Pointwise `Tr(self · other^*)` as a rank-1 field.
    pub fn herm_pair(&self, other: &Self) -> Self {
        self.pointwise(other, Pointwise::HermPair, None)
    }

    /// Multiplies every Fourier coefficient by `mult(modes, nyquist_flags)`.
    fn apply_multiplier<F>(&self, mult: F) -> Self
    where
        F: Fn(&[i64], &[bool]) -> C64 + Sync + Send,
    {
        if self.is_constant() {
            return Self::raw(self.geom.clone(), self.rank, self.shape.clone(), self.band.clone(), vec![ZERO; self.data.len()]);
        }
        let mut spec = self.spectrum();
        let n = self.npoints();
        let shape = self.shape.clone();
        let d = shape.len();
        let factors: Vec<C64> = {
            let mut f = vec![ZERO; n];
            par::fill_indexed(&mut f, |p| {
                let mut idx = [0usize; MAX_AXES];
                unravel(p, &shape, &mut idx[..d]);
                let mut k = [0i64; MAX_AXES];
                let mut nyq = [false; MAX_AXES];
                for a in 0..d {
                    k[a] = signed_mode(idx[a], shape[a]);
                    nyq[a] = is_nyquist(idx[a], shape[a]);
                }
                mult(&k[..d], &nyq[..d])
            });
            f
        };
        for e in 0..self.rank * self.rank {
            let plane = &mut spec[e * n..(e + 1) * n];
            for (v, f) in plane.iter_mut().zip(&factors) {
                *v *= f;
            }
        }
        self.from_spectrum(self.shape.clone(), self.band.clone(), spec)
    }

    /// Spectral derivative along real axis `axis`.
    pub fn partial_real(&self, axis: usize) -> Self {
        let g = self.geom.clone();
        self.apply_multiplier(move |k, nyq| {
            if nyq[axis] {
                ZERO
            } else {
                C64::new(0.0, g.wavenumber(k[axis]))
            }
        })
    }

    fn wirtinger_symbol(&self, k: usize, bar: bool) -> impl Fn(&[i64], &[bool]) -> C64 + Sync + Send {
        let g = self.geom.clone();
        let (ax, ay) = (2 * k, 2 * k + 1);
        let sy = if bar { -1.0 } else { 1.0 };
        move |m, nyq| {
            let kx = if nyq[ax] { 0.0 } else { g.wavenumber(m[ax]) };
            let ky = if nyq[ay] { 0.0 } else { g.wavenumber(m[ay]) };
            // ½(∂_x ∓ i∂_y) with ∂ ↦ iκ.
            C64::new(0.5 * sy * ky, 0.5 * kx)
        }
    }

    /// [`Self::wirtinger`] followed by truncation to `|k_a| ≤ cap_a`, in one
    /// spectral pass.
    pub fn wirtinger_capped(&self, k: usize, bar: bool, cap: &[usize]) -> Self {
        let hw: Vec<usize> = self.band.iter().zip(cap).map(|(b, c)| (*b).min(*c)).collect();
        let shape = shape_for_band(&self.geom, &hw);
        let hw: Vec<usize> = hw.iter().zip(&self.shape).map(|(h, s)| (*h).min(s / 2 - 1)).collect();
        if self.is_constant() {
            return Self::raw(self.geom.clone(), self.rank, shape.clone(), hw, vec![ZERO; self.data.len() / self.npoints() * shape.iter().product::<usize>()]);
        }
        let sym = self.wirtinger_symbol(k, bar);
        let no_nyquist = [false; MAX_AXES];
        let d = self.shape.len();
        self.place_modes(&shape, hw, Some(&|m: &[i64]| sym(m, &no_nyquist[..d])))
    }

    /// `∂_{z_k}` or, with `bar`, `∂_{z̄_k}` (zero-based `k`).
    pub fn wirtinger(&self, k: usize, bar: bool) -> Self {
        self.apply_multiplier(self.wirtinger_symbol(k, bar))
    }

    /// `∫ Tr`-free entrywise integrals (row-major), exact by trapezoid.
    pub fn integral(&self) -> Vec<C64> {
        let n = self.npoints();
        let w = self.geom.volume() / n as f64;
        (0..self.rank * self.rank)
            .map(|e| self.data[e * n..(e + 1) * n].iter().sum::<C64>() * w)
            .collect()
    }

    /// `Re ∫ Tr(self · other^*)`.
    pub fn inner(&self, other: &Self) -> f64 {
        self.check_compatible(other);
        let shape = self.common_shape(other);
        let a = self.resample(&shape);
        let b = other.resample(&shape);
        let n: usize = shape.iter().product();
        let w = self.geom.volume() / n as f64;
        let s: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x * y.conj()).re).sum();
        s * w
    }

    pub fn norm_sq(&self) -> f64 {
        let n = self.npoints();
        let w = self.geom.volume() / n as f64;
        self.data.iter().map(|v| v.norm_sqr()).sum::<f64>() * w
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }

    /// Largest entrywise deviation between two fields after alignment.
    /// Largest pointwise entry of `a + a^*`; zero for `u_E`-valued fields.
    pub fn skew_hermitian_defect(&self) -> f64 {
        self.add(&self.adjoint()).max_abs()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other).max_abs()
    }

    /// Applies `f` to the matrix at every point. The result is assumed to
    /// carry modes up to the Nyquist limit of the current grid.
    pub fn map_points<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&[C64]) -> Option<Vec<C64>> + Sync + Send,
    {
        let n = self.npoints();
        let r = self.rank;
        let mats: Vec<Option<Vec<C64>>> = par::map_range(n, |p| f(&self.matrix_at(p)));
        let mut data = vec![ZERO; n * r * r];
        for (p, m) in mats.into_iter().enumerate() {
            let m = m.ok_or_else(|| Error::Gauge(format!("pointwise map failed at grid point {p}")))?;
            for e in 0..r * r {
                data[e * n + p] = m[e];
            }
        }
        let band = self.shape.iter().map(|s| s / 2 - 1).collect();
        Ok(Self::raw(self.geom.clone(), r, self.shape.clone(), band, data))
    }

    /// Pointwise matrix inverse; errors at singular points.
    pub fn inverse(&self) -> Result<Self> {
        let r = self.rank;
        self.map_points(|m| {
            let mat = DMatrix::from_row_slice(r, r, m);
            let inv = mat.try_inverse()?;
            let ok = inv.iter().all(|v| v.re.is_finite() && v.im.is_finite());
            ok.then(|| inv.transpose().iter().copied().collect())
        })
    }
}

/// Smallest grid holding modes up to `band` without touching Nyquist, and
/// never coarser than the base grid.
pub fn shape_for_band(geom: &TorusGeometry, band: &[usize]) -> Vec<usize> {
    geom.dims().iter().zip(band).map(|(d, b)| (*d).max(2 * b + 2)).collect()
}

fn even_ceil(x: usize) -> usize {
    x + (x % 2)
}
