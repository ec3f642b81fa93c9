//! Couplings between samples at different `u`, different `T`, and
//! combinations with Bernoulli noise.

use rand::Rng;

use crate::error::{check_finite_nonneg, FriError, Result};
use crate::fri_process::{padding_radius, sample_soup_into, DecoratedSample, FriSample, LengthBand, PathSoup};
use crate::killed_walk::{sample_length_between, KillParams};
use crate::lattice::{Cube, EdgeSet, Window};
use crate::renormalization::LScales;

/// Samples `N1` given `N2 = m`, where `N_i = min{n : U_n > p_i}` for one
/// shared i.i.d. uniform sequence and `p1 < p2`.
///
/// Given `N2 = m`, the first `m - 1` uniforms are uniform on `[0, p2]`, so
/// `N1` is a geometric variable of parameter `1 - p1/p2` capped at `m`.
pub fn couple_lengths<R: Rng + ?Sized>(p1: f64, p2: f64, m: u64, rng: &mut R) -> Result<u64> {
    if !(0.0 <= p1 && p1 <= p2 && p2 < 1.0) {
        return Err(FriError::InvalidParameter(format!("need 0 <= p1 <= p2 < 1, got {p1}, {p2}")));
    }
    if m == 0 {
        return Err(FriError::InvalidParameter("N2 must be at least 1".into()));
    }
    if p2 == 0.0 {
        return Ok(1);
    }
    if p1 == p2 {
        return Ok(m);
    }
    let g = 1 + sample_length_between(p1 / p2, 0, None, rng);
    Ok(g.min(m))
}

/// Shortens every walk of a sample at `T'` into a walk with the `T`-law,
/// `T <= T'`. A walk with `k` steps has `N2 = k + 1` and keeps its first
/// `N1 - 1` steps.
pub fn shorten_paths<R: Rng + ?Sized>(sample: &FriSample, t_new: f64, rng: &mut R) -> Result<FriSample> {
    let old = *sample.params();
    if !(t_new > 0.0 && t_new <= old.t()) {
        return Err(FriError::InvalidParameter(format!("cannot shorten from T = {} to T = {t_new}", old.t())));
    }
    let params = KillParams::new(t_new, old.dim())?;
    let (p1, p2) = (params.survival(), old.survival());
    let src = sample.soup();
    let mut soup = PathSoup::new(src.dim());
    for i in 0..src.len() {
        let k = src.path_len(i) as u64;
        let n1 = couple_lengths(p1, p2, k + 1, rng)?;
        soup.push(src.start_coords(i), &src.steps(i)[..(n1 - 1) as usize]);
    }
    Ok(FriSample::from_soup(sample.u(), params, sample.window().clone(), sample.pad(), sample.max_len(), soup))
}

/// Adds an independent `FI^{extra_u,T}` over the same window and padding.
pub fn sprinkle<R: Rng + ?Sized>(sample: &FriSample, extra_u: f64, rng: &mut R) -> Result<FriSample> {
    check_finite_nonneg("sprinkled intensity", extra_u)?;
    let params = *sample.params();
    let cube = *sample.window().cube();
    let mut soup = PathSoup::new(cube.dim());
    let band = LengthBand { lo: 0, hi: sample.max_len() };
    sample_soup_into(&mut soup, &cube, sample.pad(), params.intensity(extra_u), &params, band, rng);
    let extra = FriSample::from_soup(extra_u, params, sample.window().clone(), sample.pad(), sample.max_len(), soup);
    sample.superpose(&extra)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Relation {
    /// Thresholds `u1 <= u2` of one decorated sample.
    Monotone { u1: f64, u2: f64 },
    /// The second sample was derived from the first by shortening and sprinkling.
    TDerived { t_from: f64, t_to: f64 },
}

#[derive(Clone, Debug)]
pub struct CoupledPair {
    pub first: FriSample,
    pub second: FriSample,
    pub relation: Relation,
}

/// `FI^{u,T}` from `FI^{u,T'}`, `T < T'`: shorten every walk, then add an
/// independent `FI^{u(T'-T)/(T'+1), T}`.
pub fn derive_from_larger_t<R: Rng + ?Sized>(sample: &FriSample, t_new: f64, rng: &mut R) -> Result<CoupledPair> {
    let t_old = sample.t();
    let shortened = shorten_paths(sample, t_new, rng)?;
    let extra_u = sample.u() * (t_old - t_new) / (t_old + 1.0);
    let mut second = sprinkle(&shortened, extra_u, rng)?;
    second =
        FriSample::from_soup(sample.u(), *second.params(), second.window().clone(), second.pad(), second.max_len(), second.soup().clone());
    Ok(CoupledPair { first: sample.clone(), second, relation: Relation::TDerived { t_from: t_old, t_to: t_new } })
}

/// Two thresholds of the same decorated sample.
pub fn monotone_pair(dec: &DecoratedSample, u1: f64, u2: f64) -> Result<CoupledPair> {
    if u1 > u2 {
        return Err(FriError::InvalidParameter(format!("monotone pair needs u1 <= u2, got {u1} > {u2}")));
    }
    Ok(CoupledPair { first: dec.threshold(u1)?, second: dec.threshold(u2)?, relation: Relation::Monotone { u1, u2 } })
}

/// Independent Bernoulli(`eps`) bond percolation on the edges of the window.
pub fn bernoulli_field<R: Rng + ?Sized>(window: &Window, eps: f64, rng: &mut R) -> Result<EdgeSet> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(FriError::InvalidParameter(format!("eps = {eps}")));
    }
    let mut out = EdgeSet::new(window.clone());
    for slot in 0..window.num_edge_slots() {
        if window.slot_is_valid(slot) && rng.random::<f64>() < eps {
            out.insert_slot(slot);
        }
    }
    Ok(out)
}

/// `γ_ε = FI ∪ Bernoulli(ε)` on a common window.
pub fn gamma_union(fi: &EdgeSet, bern: &EdgeSet) -> Result<EdgeSet> {
    let mut out = fi.clone();
    out.union_with(bern)?;
    Ok(out)
}

/// A realisation of `χ_t`: `FI_{L_n}^{u,T}` for `n = ⌊t⌋`, plus independent
/// walks of intensity `u (t - n)` with lengths in `(L_n, L_{n+1}]`.
#[derive(Clone, Debug)]
pub struct ChiSample {
    pub base: FriSample,
    pub band: FriSample,
    pub edges: EdgeSet,
}

pub fn sample_chi_t<R: Rng + ?Sized>(
    t: f64,
    u: f64,
    params: KillParams,
    scales: &LScales,
    cube: &Cube,
    intrusion_tol: f64,
    rng: &mut R,
) -> Result<ChiSample> {
    check_finite_nonneg("t", t)?;
    let n = t.floor() as u32;
    let l_n = scales.level(n)?;
    let base = crate::fri_process::sample_fri(u, params, cube, Some(l_n), intrusion_tol, rng)?;
    let frac = t - n as f64;
    let window = base.window().clone();
    let band = if frac > 0.0 {
        let l_next = scales.level(n + 1)?;
        let extra_u = u * frac;
        let lambda = params.intensity(extra_u);
        let pad = padding_radius(cube, lambda, params.survival(), Some(l_next), intrusion_tol)?;
        let mut soup = PathSoup::new(cube.dim());
        sample_soup_into(&mut soup, cube, pad, lambda, &params, LengthBand { lo: l_n + 1, hi: Some(l_next) }, rng);
        FriSample::from_soup(extra_u, params, window.clone(), pad, Some(l_next), soup)
    } else {
        FriSample::from_soup(0.0, params, window.clone(), 0, Some(l_n), PathSoup::new(cube.dim()))
    };
    let mut edges = base.edges().clone();
    edges.union_with(band.edges())?;
    Ok(ChiSample { base, band, edges })
}
