//! Scale hierarchies and the tree scaffolding of the multi-scale argument.

use std::collections::BTreeSet;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};

use crate::error::{FriError, Result};
use crate::lattice::{Cube, Vertex};

/// `K_n = K0 k0^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KScales {
    pub k0_base: i64,
    pub k0: i64,
}

impl KScales {
    pub fn new(k0_base: i64, k0: i64) -> Result<Self> {
        if k0_base < 1 || k0 < 2 {
            return Err(FriError::InvalidParameter(format!("K0 = {k0_base}, k0 = {k0} (need K0 >= 1, k0 >= 2)")));
        }
        Ok(KScales { k0_base, k0 })
    }

    pub fn level(&self, n: u32) -> Result<i64> {
        self.k0.checked_pow(n).and_then(|f| f.checked_mul(self.k0_base)).ok_or_else(|| FriError::TooLarge(format!("K_{n} overflows")))
    }

    fn on_grid(&self, n: u32, x: &Vertex) -> Result<i64> {
        let k = self.level(n)?;
        if x.coords().iter().any(|c| c.rem_euclid(k) != 0) {
            return Err(FriError::OffGrid(x.to_string()));
        }
        Ok(k)
    }
}

/// `L_n = L0 l0^n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LScales {
    pub l0_base: u64,
    pub l0: u64,
}

impl LScales {
    pub fn new(l0_base: u64, l0: u64) -> Result<Self> {
        if l0_base < 1 || l0 < 2 {
            return Err(FriError::InvalidParameter(format!("L0 = {l0_base}, l0 = {l0}")));
        }
        Ok(LScales { l0_base, l0 })
    }

    /// Whether the scales fall below the theoretical ranges `L0 >= 100`, `l0 >= 1000`.
    pub fn theory_range_violated(&self) -> bool {
        self.l0_base < 100 || self.l0 < 1000
    }

    pub fn level(&self, n: u32) -> Result<u64> {
        self.l0.checked_pow(n).and_then(|f| f.checked_mul(self.l0_base)).ok_or_else(|| FriError::TooLarge(format!("L_{n} overflows")))
    }
}

/// Centres `y ∈ 𝕂_{n-1}` with `B_y(K_{n-1}) ⊂ B_x(K_n)` touching `∂B_x(K_n)`.
///
/// For boxes, `B_y(r)` meets `∂B_x(s)` iff `max(0, |y-x| - r) <= s <= |y-x| + r`,
/// so these are the centres at distance exactly `K_n - K_{n-1}`.
pub fn h1_descendants(n: u32, x: &Vertex, ks: &KScales) -> Result<Vec<Vertex>> {
    if n == 0 {
        return Err(FriError::InvalidParameter("descendants need n >= 1".into()));
    }
    ks.on_grid(n, x)?;
    let k = ks.level(n - 1)?;
    Ok(sphere_of_centers(x, k, &[ks.k0 - 1]))
}

/// Centres `y ∈ 𝕂_{n-1}` with `B_y(K_{n-1}) ∩ ∂B_x(⌊1.5 K_{n-1}⌋) ≠ ∅`.
pub fn h2_descendants(n: u32, x: &Vertex, ks: &KScales) -> Result<Vec<Vertex>> {
    if n == 0 {
        return Err(FriError::InvalidParameter("descendants need n >= 1".into()));
    }
    ks.on_grid(n, x)?;
    let k = ks.level(n - 1)?;
    let s = (3 * k) / 2;
    let rings: Vec<i64> = (0..=4).filter(|&j| (j * k - k).max(0) <= s && s <= j * k + k).collect();
    Ok(sphere_of_centers(x, k, &rings))
}

fn sphere_of_centers(x: &Vertex, spacing: i64, rings: &[i64]) -> Vec<Vertex> {
    let reach = rings.iter().copied().max().unwrap_or(0);
    Cube::centered(x.dim(), reach).vertices().filter(|z| rings.contains(&z.norm_linf())).map(|z| *x + z.scale(spacing)).collect()
}

/// A tree of `(level, centre)` pairs rooted at level `n`; each internal node
/// has one `H1` child and one `H2` child.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoxTree {
    pub level: u32,
    pub center: Vertex,
    pub children: Option<Box<(BoxTree, BoxTree)>>,
}

impl BoxTree {
    /// The node set `𝒯`.
    pub fn nodes(&self) -> BTreeSet<(u32, Vertex)> {
        let mut out = BTreeSet::new();
        self.collect(&mut out);
        out
    }

    fn collect(&self, out: &mut BTreeSet<(u32, Vertex)>) {
        out.insert((self.level, self.center));
        if let Some(c) = &self.children {
            c.0.collect(out);
            c.1.collect(out);
        }
    }
}

const TREE_GUARD: u128 = 2_000_000;

/// Number of structured trees (ordered choices of `H1`/`H2` children at every
/// internal node): `(|H1| |H2|)^{2^n - 1}`, by translation invariance.
pub fn structured_tree_count(n: u32, ks: &KScales, dim: usize) -> Result<f64> {
    if n == 0 {
        return Ok(1.0);
    }
    let x = Vertex::origin(dim);
    let pairs = (h1_descendants(1, &x, ks)?.len() * h2_descendants(1, &x, ks)?.len()) as f64;
    Ok(pairs.powf((2f64).powi(n as i32) - 1.0))
}

/// All distinct node sets of `Υ_{n,x}`, for `n <= 2`.
pub fn enumerate_trees(n: u32, x: &Vertex, ks: &KScales) -> Result<Vec<BoxTree>> {
    if n > 2 {
        return Err(FriError::TooLarge(format!("tree enumeration at level {n}")));
    }
    let expected = structured_tree_count(n, ks, x.dim())?;
    if expected as u128 > TREE_GUARD {
        return Err(FriError::TooLarge(format!("{expected} structured trees")));
    }
    ks.on_grid(n, x)?;
    let all = build_trees(n, x, ks)?;
    let mut seen = BTreeSet::new();
    Ok(all.into_iter().filter(|t| seen.insert(t.nodes())).collect())
}

fn build_trees(n: u32, x: &Vertex, ks: &KScales) -> Result<Vec<BoxTree>> {
    if n == 0 {
        return Ok(vec![BoxTree { level: 0, center: *x, children: None }]);
    }
    let mut out = Vec::new();
    let h1 = h1_descendants(n, x, ks)?;
    let h2 = h2_descendants(n, x, ks)?;
    for y1 in &h1 {
        let left = build_trees(n - 1, y1, ks)?;
        for y2 in &h2 {
            let right = build_trees(n - 1, y2, ks)?;
            for a in &left {
                for b in &right {
                    out.push(BoxTree { level: n, center: *x, children: Some(Box::new((a.clone(), b.clone()))) });
                }
            }
        }
    }
    Ok(out)
}

/// Smallest `C` with `count_n <= (C k0^{2(d-1)})^{2^n}` for every supplied `(n, count_n)`.
pub fn tree_count_bound_check(counts: &[(u32, f64)], k0: i64, dim: usize) -> f64 {
    let scale = (k0 as f64).powi(2 * (dim as i32 - 1));
    counts.iter().map(|&(n, c)| c.powf(1.0 / 2f64.powi(n as i32)) / scale).fold(0.0, f64::max)
}

/// `μ(R) = ⌊exp((ln R)^{1/3})⌋`, corrected so that `(ln μ)^3 <= ln R < (ln(μ+1))^3`.
pub fn mu(r: u64) -> Result<u64> {
    if r == 0 {
        return Err(FriError::InvalidParameter("mu needs R >= 1".into()));
    }
    let lr = (r as f64).ln();
    let mut m = lr.cbrt().exp().floor().max(1.0) as u64;
    while ((m + 1) as f64).ln().powi(3) <= lr {
        m += 1;
    }
    while m > 1 && (m as f64).ln().powi(3) > lr {
        m -= 1;
    }
    Ok(m)
}

/// `ζ(b) = Σ_{j >= 1} (j + 5)^{-b}` by Euler–Maclaurin summation after 60 explicit terms.
pub fn zeta(b: f64) -> Result<f64> {
    if !(b > 1.0 && b.is_finite()) {
        return Err(FriError::InvalidParameter(format!("zeta needs b > 1, got {b}")));
    }
    let n = 66.0f64;
    let head: f64 = (6..66).map(|j| (j as f64).powf(-b)).sum();
    let mut tail = n.powf(1.0 - b) / (b - 1.0) + 0.5 * n.powf(-b);
    // B_{2k} / (2k)!
    let coeffs = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0, 1.0 / 47900160.0, -691.0 / 1307674368000.0];
    let mut rising = b;
    let mut power = n.powf(-b - 1.0);
    for (k, c) in coeffs.iter().enumerate() {
        tail += c * rising * power;
        let m = 2 * k as i32 + 1;
        rising *= (b + m as f64) * (b + m as f64 + 1.0);
        power /= n * n;
    }
    Ok(head + tail)
}

/// One value of the `J` recursion.
#[derive(Clone, Debug)]
pub struct JValue {
    pub k: u32,
    /// Exact value when `b` is a positive integer.
    pub exact: Option<BigRational>,
    pub value: f64,
    /// `ln(J_k / (J1 2^{k-1})) = Σ_{i<k} ln(1 + (i+5)^{-b})`.
    pub log_excess: f64,
}

#[derive(Clone, Debug)]
pub struct JScales {
    pub j1: u64,
    pub b: f64,
    pub values: Vec<JValue>,
}

impl JScales {
    pub fn theory_range_violated(&self) -> bool {
        self.j1 < 100
    }

    /// Checks `J1 2^{k-1} <= J_k <= e^{ζ(b)} J1 2^{k-1}` for every value.
    /// The lower bound is exact for rational recursions.
    pub fn sandwich_holds(&self) -> Result<bool> {
        let z = zeta(self.b)?;
        for v in &self.values {
            if let Some(q) = &v.exact {
                let lower = BigRational::from_integer(BigInt::from(self.j1) << (v.k - 1) as usize);
                if *q < lower {
                    return Ok(false);
                }
            } else if v.log_excess < 0.0 {
                return Ok(false);
            }
            if v.log_excess > z * (1.0 + 1e-9) {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// `J_{k+1} = 2 (1 + (k+5)^{-b}) J_k` for `k = 1..k_max-1`.
pub fn j_scales(j1: u64, b: f64, k_max: u32) -> Result<JScales> {
    if !(b > 1.0 && b <= 2.0) {
        return Err(FriError::InvalidParameter(format!("b = {b} outside (1, 2]")));
    }
    if j1 == 0 || k_max == 0 {
        return Err(FriError::InvalidParameter("J1 and k_max must be positive".into()));
    }
    let integer_b = (b.fract() == 0.0).then_some(b as u32);
    let mut exact = integer_b.map(|_| BigRational::from_integer(BigInt::from(j1)));
    let mut log_excess = 0.0f64;
    let mut values = Vec::with_capacity(k_max as usize);
    for k in 1..=k_max {
        let value = match &exact {
            Some(q) => q.to_f64().unwrap_or(f64::INFINITY),
            None => j1 as f64 * 2f64.powi(k as i32 - 1) * log_excess.exp(),
        };
        values.push(JValue { k, exact: exact.clone(), value, log_excess });
        let base = (k + 5) as f64;
        log_excess += base.powf(-b).ln_1p();
        if let (Some(q), Some(bi)) = (exact.as_mut(), integer_b) {
            let denom = BigInt::from(k + 5).pow(bi);
            let factor = BigRational::new(BigInt::from(2) * (denom.clone() + BigInt::one()), denom);
            *q = &*q * factor;
        }
    }
    Ok(JScales { j1, b, values })
}

/// Smallest constants for which the one-step recursion `p1 <= [C k0^{2(d-1)} p0]^2`
/// holds, at the point estimates and conservatively at the CI ends.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RecursionReport {
    pub c_point: f64,
    pub c_conservative: f64,
    pub ratio_p1_over_p0_squared: f64,
}

/// Each argument is `(p_hat, ci_low, ci_high)`.
pub fn recursion_diagnostic(p0: (f64, f64, f64), p1: (f64, f64, f64), k0: i64, dim: usize) -> RecursionReport {
    let scale = (k0 as f64).powi(2 * (dim as i32 - 1));
    RecursionReport {
        c_point: p1.0.sqrt() / (scale * p0.0),
        c_conservative: p1.2.sqrt() / (scale * p0.1),
        ratio_p1_over_p0_squared: p1.0 / (p0.0 * p0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn k_scales_overflow() {
        let ks = KScales::new(4, 4).unwrap();
        assert_eq!(ks.level(2).unwrap(), 64);
        assert!(ks.level(40).is_err());
        assert!(KScales::new(4, 1).is_err());
    }

    #[test]
    fn descendants_in_one_dimension() {
        let ks = KScales::new(2, 4).unwrap();
        let x = Vertex::new(&[0]);
        let h1: Vec<i64> = h1_descendants(1, &x, &ks).unwrap().iter().map(|v| v.coord(0)).collect();
        assert_eq!(h1, vec![-6, 6]);
        let h2: Vec<i64> = h2_descendants(1, &x, &ks).unwrap().iter().map(|v| v.coord(0)).collect();
        assert_eq!(h2, vec![-4, -2, 2, 4]);
        assert!(h1_descendants(1, &Vertex::new(&[2]), &ks).is_err());
    }

    #[test]
    fn trees_at_level_zero_and_one() {
        let ks = KScales::new(2, 4).unwrap();
        let x = Vertex::origin(2);
        assert_eq!(enumerate_trees(0, &x, &ks).unwrap().len(), 1);
        let n1 = enumerate_trees(1, &x, &ks).unwrap();
        let h = h1_descendants(1, &x, &ks).unwrap().len() * h2_descendants(1, &x, &ks).unwrap().len();
        assert_eq!(n1.len(), h);
        assert!(enumerate_trees(3, &x, &ks).is_err());
    }

    #[test]
    fn mu_small_values() {
        assert_eq!(mu(1).unwrap(), 1);
        assert_eq!(mu(2981).unwrap(), 7);
        assert!(mu(0).is_err());
    }

    #[test]
    fn zeta_of_two() {
        let closed = std::f64::consts::PI.powi(2) / 6.0 - (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0 + 0.04);
        assert!((zeta(2.0).unwrap() - closed).abs() < 1e-12);
    }

    #[test]
    fn j_recursion_first_step_is_exact() {
        let js = j_scales(100, 2.0, 3).unwrap();
        let j2 = js.values[1].exact.clone().unwrap();
        assert_eq!(j2, BigRational::new(BigInt::from(200 * 37), BigInt::from(36)));
        assert!(js.sandwich_holds().unwrap());
    }
}
