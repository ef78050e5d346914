//! Flat Kähler tori T^{2n} = C^n / (L Z)^{2n} with the standard metric
//! `Σ dz_k ⊗ dz̄_k`, their sampling grids, spectral differentiation and
//! quadrature.
//!
//! Real axes are ordered `x_1, y_1, x_2, y_2, …` with `z_k = x_k + i y_k`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::MatrixField;
use crate::forms::FormPQ;

pub const MAX_COMPLEX_DIM: usize = 2;
pub const MAX_AXES: usize = 2 * MAX_COMPLEX_DIM;

#[derive(Clone, Debug, PartialEq)]
pub struct TorusGeometry {
    n: usize,
    dims: Vec<usize>,
    period: f64,
    dealias: bool,
}

impl TorusGeometry {
    /// Uniform grid of `grid` points on each of the `2n` real axes.
    pub fn new(n: usize, grid: usize, period: f64, dealias: bool) -> Result<Arc<Self>> {
        Self::with_dims(n, vec![grid; 2 * n], period, dealias)
    }

    /// Grid with its own point count per real axis; used to refine a single
    /// direction when probing high frequencies.
    pub fn with_dims(n: usize, dims: Vec<usize>, period: f64, dealias: bool) -> Result<Arc<Self>> {
        if !(1..=MAX_COMPLEX_DIM).contains(&n) {
            return Err(Error::Geometry(format!("complex dimension {n} not in {{1,2}}")));
        }
        if dims.len() != 2 * n {
            return Err(Error::Geometry(format!(
                "expected {} axis sizes, got {}",
                2 * n,
                dims.len()
            )));
        }
        for &d in &dims {
            if d % 2 == 1 {
                return Err(Error::Geometry(format!("odd grid size {d}")));
            }
            if d < 4 {
                return Err(Error::Geometry(format!("grid size {d} below 4")));
            }
        }
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::Geometry(format!("period {period} must be positive")));
        }
        Ok(Arc::new(Self { n, dims, period, dealias }))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn n_axes(&self) -> usize {
        2 * self.n
    }

    /// Base grid size on each real axis.
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn dealias(&self) -> bool {
        self.dealias
    }

    pub fn npoints(&self) -> usize {
        self.dims.iter().product()
    }

    /// Total volume `L^{2n}`.
    pub fn volume(&self) -> f64 {
        self.period.powi(2 * self.n as i32)
    }

    /// Trapezoid weight of one base grid point.
    pub fn cell_weight(&self) -> f64 {
        self.volume() / self.npoints() as f64
    }

    /// Largest mode a base-grid field can hold without touching Nyquist.
    pub fn base_band(&self) -> Vec<usize> {
        self.dims.iter().map(|d| d / 2 - 1).collect()
    }

    /// Angular wavenumber of integer mode `k`.
    #[inline]
    pub fn wavenumber(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.period
    }

    /// Ricci transformation of the flat metric: the zero map.
    pub fn ricci(&self, _v: &TangentVector) -> TangentVector {
        TangentVector::zero(self.n)
    }
}

/// A complexified tangent vector `Σ h_k ∂_{z_k} + Σ a_k ∂_{z̄_k}`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub holo: Vec<Complex64>,
    pub anti: Vec<Complex64>,
}

impl TangentVector {
    pub fn zero(n: usize) -> Self {
        Self { holo: vec![Complex64::new(0.0, 0.0); n], anti: vec![Complex64::new(0.0, 0.0); n] }
    }

    pub fn d_z(n: usize, k: usize) -> Self {
        let mut v = Self::zero(n);
        v.holo[k] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn d_zbar(n: usize, k: usize) -> Self {
        let mut v = Self::zero(n);
        v.anti[k] = Complex64::new(1.0, 0.0);
        v
    }

    /// Member `j` of the unitary real frame `e_1..e_n, Je_1..Je_n` with
    /// `e_k = ∂_{x_k} = ∂_{z_k} + ∂_{z̄_k}` and
    /// `Je_k = ∂_{y_k} = i(∂_{z_k} − ∂_{z̄_k})`.
    pub fn real_frame(n: usize, j: usize) -> Self {
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let mut v = Self::zero(n);
        if j < n {
            v.holo[j] = one;
            v.anti[j] = one;
        } else {
            v.holo[j - n] = i;
            v.anti[j - n] = -i;
        }
        v
    }

    /// `v^{1,0} = ½(v − iJv)`: the `∂_z` part.
    pub fn part10(&self) -> Self {
        Self { holo: self.holo.clone(), anti: vec![Complex64::new(0.0, 0.0); self.anti.len()] }
    }

    /// `v^{0,1} = ½(v + iJv)`: the `∂_z̄` part.
    pub fn part01(&self) -> Self {
        Self { holo: vec![Complex64::new(0.0, 0.0); self.holo.len()], anti: self.anti.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.holo.iter().chain(&self.anti).all(|c| *c == Complex64::new(0.0, 0.0))
    }
}

/// Wirtinger derivative `∂_{z_k}` (or `∂_{z̄_k}` when `bar`) of the
/// trigonometric interpolant of `f`; `k` is zero-based.
pub fn wirtinger(geom: &TorusGeometry, f: &MatrixField, k: usize, bar: bool) -> Result<MatrixField> {
    if k >= geom.n() {
        return Err(Error::Index(format!("complex axis {k} on a torus of dimension {}", geom.n())));
    }
    if f.geom().as_ref() != geom {
        return Err(Error::Mismatch("field lives on a different torus".into()));
    }
    Ok(f.wirtinger(k, bar))
}

/// `∫_M ⟨α, β⟩` for the real metric `Re Σ 2^{p+q} Tr(α_{IK} β_{IK}^*)`.
/// Forms of different bidegree are orthogonal.
pub fn l2_inner(geom: &TorusGeometry, alpha: &FormPQ, beta: &FormPQ) -> Result<f64> {
    if alpha.geom().as_ref() != geom || beta.geom().as_ref() != geom {
        return Err(Error::Mismatch("form lives on a different torus".into()));
    }
    if alpha.rank() != beta.rank() {
        return Err(Error::Mismatch(format!("rank {} vs {}", alpha.rank(), beta.rank())));
    }
    if alpha.bidegree() != beta.bidegree() {
        return Ok(0.0);
    }
    Ok(alpha.inner(beta))
}
