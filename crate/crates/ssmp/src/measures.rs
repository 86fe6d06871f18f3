//! Lévy triplets, the sign-change measure `V`, the jump-factor measure `barΠ`
//! and the scalar functionals derived from them.
//!
//! Measures are parametric: a list of atoms plus a list of densities drawn
//! from a few families with closed-form masses and inverse CDFs. A density
//! may be carried through a monotone change of variables (`u ↦ e^u`,
//! `u ↦ log|u|`, `u ↦ -u`); integrals against such an image are evaluated in
//! the base coordinate, so no Jacobians appear anywhere.

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::quad;

/// `sign(x) = 1_{x>0} - 1_{x<=0}`, so `sign(0) = -1`.
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// `sign₀(x) = 1_{x>0} - 1_{x<0}`, so `sign₀(0) = 0`.
pub fn sign0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `e^x - 1 - x` without cancellation for small `x`.
fn exp_m1_m_x(x: f64) -> f64 {
    if x.abs() < 1e-3 {
        x * x * (0.5 + x * (1.0 / 6.0 + x * (1.0 / 24.0 + x / 120.0)))
    } else {
        x.exp_m1() - x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub mass: f64,
}

/// Base density families, written in their own coordinate `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityFamily {
    /// `c·e^{βx}` on `(-∞, 0)`.
    Exponential { c: f64, beta: f64 },
    /// `c·|x|^{-1-α}` on `(-1, 0)`, `α ∈ (0, 2)`; infinite mass near 0.
    TruncatedStable { c: f64, alpha: f64 },
    /// `c` on `(lo, hi)`.
    Uniform { c: f64, lo: f64, hi: f64 },
}

/// Monotone map carrying a base density to the coordinate it is used in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    #[default]
    Identity,
    /// `x ↦ e^x`
    Exp,
    /// `x ↦ log|x|`, base restricted to `x < 0`
    LogAbs,
    /// `x ↦ -x`
    Negate,
}

impl Transform {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Transform::Identity => x,
            Transform::Exp => x.exp(),
            Transform::LogAbs => (-x).ln(),
            Transform::Negate => -x,
        }
    }

    /// `apply(x) - 1` without cancellation near the image point 1.
    pub fn apply_m1(self, x: f64) -> f64 {
        match self {
            Transform::Exp => x.exp_m1(),
            t => t.apply(x) - 1.0,
        }
    }

    /// Preimage of the target interval `[lo, hi]` as a base interval.
    fn preimage(self, lo: f64, hi: f64) -> (f64, f64) {
        match self {
            Transform::Identity => (lo, hi),
            Transform::Exp => {
                let l = if lo <= 0.0 { f64::NEG_INFINITY } else { lo.ln() };
                let h = if hi <= 0.0 { f64::NEG_INFINITY } else { hi.ln() };
                (l, h)
            }
            Transform::LogAbs => (-hi.exp(), -lo.exp()),
            Transform::Negate => (-hi, -lo),
        }
    }

    fn image(self, lo: f64, hi: f64) -> (f64, f64) {
        let (a, b) = (self.apply(lo), self.apply(hi));
        if a <= b {
            (a, b)
        } else {
            (b, a)
        }
    }

    fn compose_after_identity(self, other: Transform) -> Result<Transform> {
        match (self, other) {
            (Transform::Identity, t) | (t, Transform::Identity) => Ok(t),
            _ => Err(Error::Domain(
                "only one non-identity change of variables is supported per density".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Density {
    #[serde(flatten)]
    pub family: DensityFamily,
    #[serde(skip_serializing_if = "is_identity")]
    pub transform: Transform,
}

fn is_identity(t: &Transform) -> bool {
    *t == Transform::Identity
}

impl Density {
    pub fn exponential(c: f64, beta: f64) -> Self {
        Self::base(DensityFamily::Exponential { c, beta })
    }

    pub fn truncated_stable(c: f64, alpha: f64) -> Self {
        Self::base(DensityFamily::TruncatedStable { c, alpha })
    }

    pub fn uniform(c: f64, lo: f64, hi: f64) -> Self {
        Self::base(DensityFamily::Uniform { c, lo, hi })
    }

    fn base(family: DensityFamily) -> Self {
        Density {
            family,
            transform: Transform::Identity,
        }
    }

    fn base_support(&self) -> (f64, f64) {
        match self.family {
            DensityFamily::Exponential { .. } => (f64::NEG_INFINITY, 0.0),
            DensityFamily::TruncatedStable { .. } => (-1.0, 0.0),
            DensityFamily::Uniform { lo, hi, .. } => (lo, hi),
        }
    }

    /// Support in the target coordinate.
    pub fn support(&self) -> (f64, f64) {
        let (lo, hi) = self.base_support();
        self.transform.image(lo, hi)
    }

    pub fn is_finite_total_mass(&self) -> bool {
        !matches!(self.family, DensityFamily::TruncatedStable { .. })
    }

    /// Point of infinite mass concentration in the target coordinate, if any.
    pub fn singular_point(&self) -> Option<f64> {
        match self.family {
            DensityFamily::TruncatedStable { .. } => Some(self.transform.apply(0.0)),
            _ => None,
        }
    }

    fn base_density(&self, x: f64) -> f64 {
        match self.family {
            DensityFamily::Exponential { c, beta } => {
                if x < 0.0 {
                    c * (beta * x).exp()
                } else {
                    0.0
                }
            }
            DensityFamily::TruncatedStable { c, alpha } => {
                if x > -1.0 && x < 0.0 {
                    c * (-x).powf(-1.0 - alpha)
                } else {
                    0.0
                }
            }
            DensityFamily::Uniform { c, lo, hi } => {
                if x > lo && x < hi {
                    c
                } else {
                    0.0
                }
            }
        }
    }

    /// Density of the image measure at `u` (Lebesgue density in the target coordinate).
    pub fn density_at(&self, u: f64) -> f64 {
        match self.transform {
            Transform::Identity => self.base_density(u),
            Transform::Exp if u > 0.0 => self.base_density(u.ln()) / u,
            Transform::Exp => 0.0,
            Transform::LogAbs => {
                let x = -u.exp();
                self.base_density(x) * u.exp()
            }
            Transform::Negate => self.base_density(-u),
        }
    }

    fn clip_base(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (a, b) = self.base_support();
        (lo.max(a), hi.min(b))
    }

    /// Base-coordinate interval of the part of this density lying in target `[lo, hi]`.
    fn base_window(&self, lo: f64, hi: f64) -> (f64, f64) {
        let (bl, bh) = self.transform.preimage(lo, hi);
        self.clip_base(bl, bh)
    }

    fn base_mass(&self, lo: f64, hi: f64) -> f64 {
        if hi <= lo {
            return 0.0;
        }
        match self.family {
            DensityFamily::Exponential { c, beta } => {
                c / beta * ((beta * hi).exp() - (beta * lo).exp())
            }
            DensityFamily::TruncatedStable { c, alpha } => {
                let (wa, wb) = (-hi, -lo);
                if wa <= 0.0 {
                    return f64::INFINITY;
                }
                c / alpha * (wa.powf(-alpha) - wb.powf(-alpha))
            }
            DensityFamily::Uniform { c, .. } => c * (hi - lo),
        }
    }

    /// Inverse-CDF draw from the base density restricted to `(lo, hi)`.
    fn base_sample(&self, lo: f64, hi: f64, uniform: f64) -> f64 {
        match self.family {
            DensityFamily::Exponential { beta, .. } => {
                let (el, eh) = ((beta * lo).exp(), (beta * hi).exp());
                (el + uniform * (eh - el)).ln() / beta
            }
            DensityFamily::TruncatedStable { alpha, .. } => {
                let (ta, tb) = ((-hi).powf(-alpha), (-lo).powf(-alpha));
                -(ta - uniform * (ta - tb)).powf(-1.0 / alpha)
            }
            DensityFamily::Uniform { .. } => lo + uniform * (hi - lo),
        }
    }

    /// `∫ g(T(x)) μ(dx)` over the base window `(lo, hi)`.
    fn base_integral<G: Fn(f64) -> f64>(&self, g: &G, lo: f64, hi: f64) -> Result<f64> {
        self.base_integral_m1(&|u: f64, _| g(u), lo, hi)
    }

    /// Like [`Self::base_integral`], the integrand also receiving `T(x) - 1`
    /// computed without cancellation.
    fn base_integral_m1<G: Fn(f64, f64) -> f64>(&self, g: &G, lo: f64, hi: f64) -> Result<f64> {
        if hi <= lo {
            return Ok(0.0);
        }
        let t = self.transform;
        let f = |x: f64| {
            let d = self.base_density(x);
            if d == 0.0 {
                0.0
            } else {
                g(t.apply(x), t.apply_m1(x)) * d
            }
        };
        let not_integrable = || {
            Error::NotIntegrable(format!(
                "{:?} over ({lo}, {hi}) does not integrate the requested functional",
                self.family
            ))
        };
        match self.family {
            DensityFamily::Exponential { beta, .. } => {
                if lo == f64::NEG_INFINITY {
                    Ok(quad::integrate_left_tail(&f, hi, beta))
                } else {
                    Ok(quad::gauss_legendre(&f, lo, hi))
                }
            }
            DensityFamily::TruncatedStable { .. } => {
                quad::integrate_toward(&f, lo, hi, hi).ok_or_else(not_integrable)
            }
            DensityFamily::Uniform { .. } => {
                if t == Transform::LogAbs && hi == 0.0 {
                    quad::integrate_toward(&f, lo, hi, hi).ok_or_else(not_integrable)
                } else {
                    Ok(quad::gauss_legendre(&f, lo, hi))
                }
            }
        }
    }

    fn validate(&self, path: &str) -> Result<()> {
        let bad = |m: &str| Err(Error::config(path, m));
        match self.family {
            DensityFamily::Exponential { c, beta } => {
                if !(c >= 0.0 && c.is_finite()) {
                    return bad("exponential density needs c >= 0");
                }
                if !(beta > 0.0 && beta.is_finite()) {
                    return bad("exponential density needs beta > 0");
                }
            }
            DensityFamily::TruncatedStable { c, alpha } => {
                if !(c >= 0.0 && c.is_finite()) {
                    return bad("stable density needs c >= 0");
                }
                if !(alpha > 0.0 && alpha < 2.0) {
                    return bad("stable density needs alpha in (0, 2) so that u^2 is integrable");
                }
                if self.transform == Transform::LogAbs {
                    return bad("log|u| image of an infinite density is not a Lévy measure");
                }
            }
            DensityFamily::Uniform { c, lo, hi } => {
                if !(c >= 0.0 && c.is_finite()) {
                    return bad("uniform density needs c >= 0");
                }
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return bad("uniform density needs finite lo < hi");
                }
                if self.transform == Transform::LogAbs && hi > 0.0 {
                    return bad("log|u| image needs a density on negative reals");
                }
            }
        }
        Ok(())
    }
}

/// A measure on the real line: atoms plus parametric densities.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct JumpMeasureSpec {
    pub atoms: Vec<Atom>,
    pub densities: Vec<Density>,
    /// Width of the band around a density's singular point that is compensated
    /// rather than sampled. Only infinite-mass densities use it.
    pub small_jump_cutoff: f64,
}

impl JumpMeasureSpec {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn atom(location: f64, mass: f64) -> Self {
        Self {
            atoms: vec![Atom { location, mass }],
            ..Self::default()
        }
    }

    pub fn with_atom(mut self, location: f64, mass: f64) -> Self {
        self.atoms.push(Atom { location, mass });
        self
    }

    pub fn with_density(mut self, density: Density) -> Self {
        self.densities.push(density);
        self
    }

    pub fn with_cutoff(mut self, cutoff: f64) -> Self {
        self.small_jump_cutoff = cutoff;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.mass == 0.0) && self.densities.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.mass_in(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn is_finite(&self) -> bool {
        self.densities.iter().all(Density::is_finite_total_mass)
    }

    /// Mass of the closed interval `[lo, hi]` (atoms on the boundary included).
    pub fn mass_in(&self, lo: f64, hi: f64) -> f64 {
        let atoms: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location >= lo && a.location <= hi)
            .map(|a| a.mass)
            .sum();
        let dens: f64 = self
            .densities
            .iter()
            .map(|d| {
                let (l, h) = d.base_window(lo, hi);
                d.base_mass(l, h)
            })
            .sum();
        atoms + dens
    }

    /// `∫_{[lo,hi]} g(u) μ(du)`.
    pub fn integrate_in<G: Fn(f64) -> f64>(&self, g: G, lo: f64, hi: f64) -> Result<f64> {
        let mut total: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location >= lo && a.location <= hi)
            .map(|a| a.mass * g(a.location))
            .sum();
        for d in &self.densities {
            let (l, h) = d.base_window(lo, hi);
            total += d.base_integral(&g, l, h)?;
        }
        Ok(total)
    }

    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G) -> Result<f64> {
        self.integrate_in(g, f64::NEG_INFINITY, f64::INFINITY)
    }

    /// `∫_{[lo,hi]} g(u, u-1) μ(du)`, with `u - 1` accurate for marks near 1.
    pub fn integrate_in_m1<G: Fn(f64, f64) -> f64>(&self, g: G, lo: f64, hi: f64) -> Result<f64> {
        let mut total: f64 = self
            .atoms
            .iter()
            .filter(|a| a.location >= lo && a.location <= hi)
            .map(|a| a.mass * g(a.location, a.location - 1.0))
            .sum();
        for d in &self.densities {
            let (l, h) = d.base_window(lo, hi);
            total += d.base_integral_m1(&g, l, h)?;
        }
        Ok(total)
    }

    /// Support hull of atoms with positive mass and densities.
    pub fn support_hull(&self) -> Option<(f64, f64)> {
        let mut hull: Option<(f64, f64)> = None;
        let mut push = |lo: f64, hi: f64| {
            hull = Some(match hull {
                None => (lo, hi),
                Some((a, b)) => (a.min(lo), b.max(hi)),
            });
        };
        for a in self.atoms.iter().filter(|a| a.mass > 0.0) {
            push(a.location, a.location);
        }
        for d in &self.densities {
            let (lo, hi) = d.support();
            push(lo, hi);
        }
        hull
    }

    /// Image under a change of variables. Atoms move, densities record the map.
    pub fn image(&self, t: Transform) -> Result<Self> {
        let atoms = self
            .atoms
            .iter()
            .map(|a| Atom {
                location: t.apply(a.location),
                mass: a.mass,
            })
            .collect();
        let densities = self
            .densities
            .iter()
            .map(|d| {
                Ok(Density {
                    family: d.family,
                    transform: d.transform.compose_after_identity(t)?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            atoms,
            densities,
            small_jump_cutoff: self.small_jump_cutoff,
        })
    }

    /// Sum of two measures; the cutoff of `self` is kept.
    pub fn plus(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.atoms.extend(other.atoms.iter().copied());
        out.densities.extend(other.densities.iter().copied());
        out
    }

    /// Sampler for the restriction to `[lo, hi]`, with each infinite density
    /// additionally cut at distance `band` from its singular point.
    pub fn sampler(&self, lo: f64, hi: f64, band: f64) -> Result<MarkSampler> {
        let mut pieces = Vec::new();
        for a in &self.atoms {
            if a.mass > 0.0 && a.location >= lo && a.location <= hi {
                pieces.push((a.mass, Piece::Atom(a.location)));
            }
        }
        for d in &self.densities {
            let (mut l, mut h) = (lo, hi);
            if let Some(s) = d.singular_point() {
                let (sl, sh) = d.support();
                let reaches = if sh <= s {
                    h = h.min(s - band);
                    h >= s
                } else if sl >= s {
                    l = l.max(s + band);
                    l <= s
                } else {
                    true
                };
                if reaches {
                    return Err(Error::Domain(
                        "infinite-mass density needs a positive small-jump cutoff to be sampled"
                            .into(),
                    ));
                }
            }
            let (bl, bh) = d.base_window(l, h);
            let mass = d.base_mass(bl, bh);
            if mass > 0.0 {
                pieces.push((mass, Piece::Density(*d, bl, bh)));
            }
        }
        let total = pieces.iter().map(|p| p.0).sum();
        Ok(MarkSampler { pieces, total })
    }

    fn validate(&self, path: &str, support: (f64, f64), support_text: &str) -> Result<()> {
        if !(self.small_jump_cutoff >= 0.0 && self.small_jump_cutoff.is_finite()) {
            return Err(Error::config(
                format!("{path}.small_jump_cutoff"),
                "must be a finite non-negative number",
            ));
        }
        for (i, a) in self.atoms.iter().enumerate() {
            let p = format!("{path}.atoms[{i}]");
            if !(a.mass >= 0.0 && a.mass.is_finite()) {
                return Err(Error::config(format!("{p}.mass"), "must be finite and >= 0"));
            }
            if !(a.location >= support.0 && a.location <= support.1) {
                return Err(Error::config(
                    format!("{p}.location"),
                    format!("{} outside the support {support_text}", a.location),
                ));
            }
        }
        for (i, d) in self.densities.iter().enumerate() {
            let p = format!("{path}.densities[{i}]");
            d.validate(&p)?;
            let (lo, hi) = d.support();
            if lo < support.0 || hi > support.1 {
                return Err(Error::config(
                    p,
                    format!("density support ({lo}, {hi}) outside {support_text}"),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Piece {
    Atom(f64),
    Density(Density, f64, f64),
}

/// Draws marks from a finite restriction of a [`JumpMeasureSpec`],
/// normalised to a probability law.
#[derive(Debug, Clone)]
pub struct MarkSampler {
    pieces: Vec<(f64, Piece)>,
    total: f64,
}

impl MarkSampler {
    pub fn empty() -> Self {
        Self {
            pieces: Vec::new(),
            total: 0.0,
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.total
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        debug_assert!(self.total > 0.0);
        let mut pick = rng.random::<f64>() * self.total;
        let mut chosen = self.pieces.last().expect("sampler has no mass").1;
        for (w, p) in &self.pieces {
            if pick < *w {
                chosen = *p;
                break;
            }
            pick -= w;
        }
        match chosen {
            Piece::Atom(x) => x,
            Piece::Density(d, lo, hi) => {
                let x = d.base_sample(lo, hi, rng.random::<f64>());
                d.transform.apply(x)
            }
        }
    }
}

/// Characteristics `(a, σ², Π, q)` of a spectrally negative Lévy process
/// killed at rate `q`. Lévy–Khintchine truncation is `1_{|u|<=1}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyTriplet {
    pub a: f64,
    pub sigma2: f64,
    pub pi: JumpMeasureSpec,
    pub q: f64,
}

impl LevyTriplet {
    pub fn new(a: f64, sigma2: f64, pi: JumpMeasureSpec, q: f64) -> Result<Self> {
        let t = Self { a, sigma2, pi, q };
        t.validate("triplet")?;
        Ok(t)
    }

    /// Triplet whose linear drift is chosen so that `Ψ(1) = psi1`.
    pub fn with_psi1(psi1: f64, sigma2: f64, pi: JumpMeasureSpec, q: f64) -> Result<Self> {
        let mut t = Self::new(0.0, sigma2, pi, q)?;
        t.a = psi1 - laplace_exponent(&t, 1.0)?;
        Ok(t)
    }

    /// Drift-only triplet with zero jumps and no killing.
    pub fn brownian(a: f64, sigma2: f64) -> Self {
        Self {
            a,
            sigma2,
            pi: JumpMeasureSpec::zero(),
            q: 0.0,
        }
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        if !self.a.is_finite() {
            return Err(Error::config(format!("{path}.a"), "must be finite"));
        }
        if !(self.sigma2 >= 0.0 && self.sigma2.is_finite()) {
            return Err(Error::config(format!("{path}.sigma2"), "must be >= 0"));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return Err(Error::config(format!("{path}.q"), "must be >= 0"));
        }
        self.pi.validate(
            &format!("{path}.pi"),
            (f64::NEG_INFINITY, 0.0),
            "(-inf, 0) (spectrally negative)",
        )?;
        if self.pi.atoms.iter().any(|a| a.location >= 0.0) {
            return Err(Error::config(format!("{path}.pi"), "atoms must be negative"));
        }
        Ok(())
    }
}

/// A triplet together with the finite sign-change measure `V` on `[-1, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quintuple {
    pub triplet: LevyTriplet,
    pub v: JumpMeasureSpec,
}

impl Quintuple {
    pub fn new(triplet: LevyTriplet, v: JumpMeasureSpec) -> Result<Self> {
        let q = Self { triplet, v };
        q.validate("quintuple")?;
        Ok(q)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        self.triplet.validate(&format!("{path}.triplet"))?;
        self.v
            .validate(&format!("{path}.v"), (-1.0, 0.0), "[-1, 0)")?;
        if self.v.atoms.iter().any(|a| a.location >= 0.0) {
            return Err(Error::config(format!("{path}.v"), "atoms must lie in [-1, 0)"));
        }
        if !self.v.is_finite() {
            return Err(Error::config(format!("{path}.v"), "V must be a finite measure"));
        }
        Ok(())
    }

    /// Total mass `p = V([-1, 0))`.
    pub fn sign_change_rate(&self) -> f64 {
        self.v.total_mass()
    }
}

/// Lévy–Khintchine integral `∫(e^{λu} - 1 - λu 1_{|u|<=1}) Π(du)` of one density by closed form.
fn lk_density_closed(d: &Density, lam: f64) -> Option<f64> {
    if d.transform != Transform::Identity {
        return None;
    }
    match d.family {
        DensityFamily::Exponential { c, beta } => {
            let inner = -1.0 / (beta * beta) + (-beta).exp() * (1.0 / beta + 1.0 / (beta * beta));
            Some(c * (1.0 / (lam + beta) - 1.0 / beta) - c * lam * inner)
        }
        DensityFamily::TruncatedStable { c, alpha } if lam <= 8.0 => {
            // Σ_{n>=2} (-λ)^n / (n! (n - α))
            let mut term = lam * lam / 2.0;
            let mut sum = 0.0;
            let mut n = 2.0;
            loop {
                let contrib = term / (n - alpha);
                sum += contrib;
                if contrib.abs() < 1e-18 * sum.abs().max(1e-300) {
                    break;
                }
                n += 1.0;
                term *= -lam / n;
            }
            Some(c * sum)
        }
        _ => None,
    }
}

fn lk_kernel(lam: f64) -> impl Fn(f64) -> f64 {
    move |u: f64| {
        if u.abs() <= 1.0 {
            exp_m1_m_x(lam * u)
        } else {
            (lam * u).exp_m1()
        }
    }
}

fn lk_density_quadrature(d: &Density, lam: f64) -> Result<f64> {
    let k = lk_kernel(lam);
    let (lo, hi) = d.support();
    // split at ±1 where the compensator switches off
    let mut total = 0.0;
    let cuts = [lo, -1.0, 1.0, hi];
    for w in cuts.windows(2) {
        let (a, b) = (w[0].max(lo), w[1].min(hi));
        if b > a {
            let (bl, bh) = d.base_window(a, b);
            total += d.base_integral(&k, bl, bh)?;
        }
    }
    Ok(total)
}

fn check_lambda(lam: f64) -> Result<()> {
    if lam >= 0.0 && lam.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("Laplace exponent needs lambda >= 0, got {lam}")))
    }
}

/// `Ψ(λ) = -q + aλ + σ²λ²/2 + ∫(e^{λu} - 1 - λu 1_{|u|<=1}) Π(du)`.
///
/// Atoms are exact; exponential and stable densities use closed forms, any
/// other density falls back to quadrature.
pub fn laplace_exponent(triplet: &LevyTriplet, lam: f64) -> Result<f64> {
    check_lambda(lam)?;
    let mut psi = -triplet.q + triplet.a * lam + 0.5 * triplet.sigma2 * lam * lam;
    let k = lk_kernel(lam);
    psi += triplet.pi.atoms.iter().map(|a| a.mass * k(a.location)).sum::<f64>();
    for d in &triplet.pi.densities {
        psi += match lk_density_closed(d, lam) {
            Some(v) => v,
            None => lk_density_quadrature(d, lam)?,
        };
    }
    Ok(psi)
}

/// Same quantity as [`laplace_exponent`], with every density integrated by quadrature.
pub fn laplace_exponent_quadrature(triplet: &LevyTriplet, lam: f64) -> Result<f64> {
    check_lambda(lam)?;
    let mut psi = -triplet.q + triplet.a * lam + 0.5 * triplet.sigma2 * lam * lam;
    let k = lk_kernel(lam);
    psi += triplet.pi.atoms.iter().map(|a| a.mass * k(a.location)).sum::<f64>();
    for d in &triplet.pi.densities {
        psi += lk_density_quadrature(d, lam)?;
    }
    Ok(psi)
}

/// `Ψ(1) + ∫(u-1) V(du)`, the coefficient of the sign drift.
pub fn drift_coefficient(quintuple: &Quintuple) -> Result<f64> {
    Ok(laplace_exponent(&quintuple.triplet, 1.0)? + quintuple.v.integrate(|u| u - 1.0)?)
}

/// `Ψ(1) + ∫(|u|-1) V(du)`; positive exactly when solutions can leave zero continuously.
pub fn cramer_value(quintuple: &Quintuple) -> Result<f64> {
    Ok(laplace_exponent(&quintuple.triplet, 1.0)? + quintuple.v.integrate(|u| u.abs() - 1.0)?)
}

/// Decides the overshoot criterion for a spectrally negative triplet:
/// an extension leaving zero continuously exists iff `Ψ(1) > 0`.
pub fn check_overshoot_condition(triplet: &LevyTriplet) -> Result<bool> {
    Ok(laplace_exponent(triplet, 1.0)? > 0.0)
}

/// Triplet of the Lévy process underlying `|Z|`: every sign change becomes a
/// jump `log|u|` of the log-modulus, arriving at rate `V(du)`.
pub fn folded_triplet(quintuple: &Quintuple) -> Result<LevyTriplet> {
    let t = &quintuple.triplet;
    let logs = quintuple.v.image(Transform::LogAbs)?;
    // a compound Poisson part added without compensation shifts the
    // truncated drift by ∫_{|x|<=1} x ν(dx)
    let shift = logs.integrate_in(|x| x, -1.0, 1.0)?;
    let mut pi = t.pi.plus(&logs);
    pi.atoms.retain(|a| a.location != 0.0);
    Ok(LevyTriplet {
        a: t.a + shift,
        sigma2: t.sigma2,
        pi,
        q: t.q,
    })
}

/// The jump-factor measure on `[-1, 1]`: `e^u`-image of `Π` on `(0, 1]`,
/// an atom `q` at zero, and `V` on `[-1, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BarPi {
    pub positive_part: JumpMeasureSpec,
    pub zero_atom: f64,
    pub negative_part: JumpMeasureSpec,
    /// Marks of infinite densities within `cutoff` of 1 are not sampled.
    pub cutoff: f64,
    /// `∫_{(1-cutoff, 1)} (u-1) barΠ(du)` over the unsampled band.
    pub neglected_drift: f64,
}

/// Jump marks selected for simulation, with the compensator integrals that
/// go with them.
#[derive(Debug, Clone)]
pub struct JumpKernel {
    pub sampler: MarkSampler,
    /// `∫ (u-1) barΠ(du)` over the sampled marks.
    pub signed_compensator: f64,
    /// `∫ (|u|-1) barΠ(du)` over the sampled marks.
    pub abs_compensator: f64,
    zero_mass: f64,
    nonzero: MarkSampler,
}

impl JumpKernel {
    pub fn total_mass(&self) -> f64 {
        self.zero_mass + self.nonzero.total_mass()
    }

    pub fn is_empty(&self) -> bool {
        self.total_mass() <= 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sampler.sample(rng)
    }
}

impl BarPi {
    pub fn total_mass(&self) -> f64 {
        self.positive_part.total_mass() + self.zero_atom + self.negative_part.total_mass()
    }

    /// `∫_{[lo,hi]} g(u, u-1) barΠ(du)`; the second argument stays accurate near `u = 1`.
    pub fn integrate_in<G: Fn(f64, f64) -> f64>(&self, g: G, lo: f64, hi: f64) -> Result<f64> {
        let mut total = self.positive_part.integrate_in_m1(&g, lo, hi)?;
        if lo <= 0.0 && hi >= 0.0 {
            total += self.zero_atom * g(0.0, -1.0);
        }
        total += self.negative_part.integrate_in_m1(&g, lo, hi)?;
        Ok(total)
    }

    pub fn integrate<G: Fn(f64, f64) -> f64>(&self, g: G) -> Result<f64> {
        self.integrate_in(g, -1.0, 1.0)
    }

    /// `∫_{[-1,1]} (u-1)² barΠ(du)`, finite for every valid quintuple.
    pub fn second_moment_about_one(&self) -> Result<f64> {
        self.integrate(|_, um1| um1 * um1)
    }

    /// Marks in `[-1, upper]`; infinite densities are also kept `cutoff` away from 1.
    pub fn jump_kernel(&self, upper: f64) -> Result<JumpKernel> {
        let upper = upper.min(1.0);
        let band = self.cutoff;
        let pos = self.positive_part.sampler(0.0, upper, band)?;
        let neg = self.negative_part.sampler(-1.0, upper.min(0.0), band)?;
        let mut nonzero_pieces = pos.pieces.clone();
        nonzero_pieces.extend(neg.pieces.iter().copied());
        let nonzero = MarkSampler {
            total: nonzero_pieces.iter().map(|p| p.0).sum(),
            pieces: nonzero_pieces,
        };
        let zero_mass = if upper >= 0.0 { self.zero_atom } else { 0.0 };
        let mut all = nonzero.pieces.clone();
        if zero_mass > 0.0 {
            all.push((zero_mass, Piece::Atom(0.0)));
        }
        let sampler = MarkSampler {
            total: all.iter().map(|p| p.0).sum(),
            pieces: all,
        };
        let restricted = |g: &dyn Fn(f64, f64) -> f64| -> Result<f64> {
            let mut s = zero_mass * g(0.0, -1.0);
            for (w, p) in &nonzero.pieces {
                s += match *p {
                    Piece::Atom(x) => w * g(x, x - 1.0),
                    Piece::Density(d, lo, hi) => d.base_integral_m1(&g, lo, hi)?,
                };
            }
            Ok(s)
        };
        let signed_compensator = restricted(&|_, um1| um1)?;
        let abs_compensator = restricted(&|u, um1| if u >= 0.0 { um1 } else { -u - 1.0 })?;
        Ok(JumpKernel {
            sampler,
            signed_compensator,
            abs_compensator,
            zero_mass,
            nonzero,
        })
    }
}

/// Assembles `barΠ` from a quintuple. `cutoff ∈ [0, 1)` sets the unsampled band near `u = 1`.
pub fn build_bar_pi(quintuple: &Quintuple, cutoff: f64) -> Result<BarPi> {
    if !(0.0..1.0).contains(&cutoff) {
        return Err(Error::config("cutoff", format!("must lie in [0, 1), got {cutoff}")));
    }
    let positive_part = quintuple.triplet.pi.image(Transform::Exp)?;
    let mut neglected_drift = 0.0;
    if cutoff > 0.0 {
        for d in positive_part.densities.iter().filter(|d| !d.is_finite_total_mass()) {
            let (lo, hi) = d.base_window(1.0 - cutoff, 1.0);
            neglected_drift += d.base_integral_m1(&|_, um1| um1, lo, hi)?;
        }
    }
    Ok(BarPi {
        positive_part,
        zero_atom: quintuple.triplet.q,
        negative_part: quintuple.v.clone(),
        cutoff,
        neglected_drift,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn quint(psi1: f64, v: JumpMeasureSpec) -> Quintuple {
        Quintuple::new(LevyTriplet::brownian(psi1, 0.0), v).unwrap()
    }

    #[test]
    fn sign_conventions() {
        assert_eq!(sign(0.0), -1.0);
        assert_eq!(sign0(0.0), 0.0);
        assert_eq!(sign(2.0), 1.0);
        assert_eq!(sign0(-2.0), -1.0);
    }

    #[test]
    fn zero_process_has_zero_exponent() {
        let t = LevyTriplet::brownian(0.0, 0.0);
        assert_eq!(laplace_exponent(&t, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn brownian_with_drift_exponent() {
        for (alpha, sigma) in [(1.0, 2.0), (-0.3, 0.5), (2.5, 1.0)] {
            let t = LevyTriplet::brownian(alpha - sigma * sigma / 2.0, sigma * sigma);
            assert_relative_eq!(laplace_exponent(&t, 1.0).unwrap(), alpha, epsilon = 1e-14);
        }
    }

    #[test]
    fn single_atom_exponent() {
        let p = 0.7;
        let t = LevyTriplet::new(0.0, 0.0, JumpMeasureSpec::atom(-1.0, p), 0.0).unwrap();
        let closed = p * ((-1f64).exp() - 1.0 + 1.0);
        assert_relative_eq!(laplace_exponent(&t, 1.0).unwrap(), closed, max_relative = 1e-14);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        let pi = JumpMeasureSpec::zero()
            .with_density(Density::exponential(1.5, 2.0))
            .with_density(Density::truncated_stable(0.4, 1.3))
            .with_density(Density::uniform(0.3, -3.0, -0.2));
        let t = LevyTriplet::new(0.1, 0.5, pi, 0.2).unwrap();
        for lam in [0.0, 0.3, 1.0, 1.7, 2.0, 5.0] {
            let a = laplace_exponent(&t, lam).unwrap();
            let b = laplace_exponent_quadrature(&t, lam).unwrap();
            assert_relative_eq!(a, b, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn negative_lambda_is_rejected() {
        let t = LevyTriplet::brownian(0.0, 1.0);
        assert!(matches!(laplace_exponent(&t, -0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn bad_stable_index_is_a_config_error() {
        let pi = JumpMeasureSpec::zero().with_density(Density::truncated_stable(1.0, 2.5));
        let err = LevyTriplet::new(0.0, 0.0, pi, 0.0).unwrap_err();
        assert!(err.to_string().contains("triplet.pi.densities[0]"), "{err}");
    }

    #[test]
    fn drift_and_cramer_examples() {
        let alpha = 1.3;
        let p = 0.4;
        let q0 = quint(alpha, JumpMeasureSpec::zero());
        assert_relative_eq!(drift_coefficient(&q0).unwrap(), alpha);
        assert_relative_eq!(cramer_value(&q0).unwrap(), alpha);

        let q1 = quint(alpha, JumpMeasureSpec::atom(-1.0, p));
        assert_relative_eq!(drift_coefficient(&q1).unwrap(), alpha - 2.0 * p, epsilon = 1e-14);
        assert_relative_eq!(cramer_value(&q1).unwrap(), alpha, epsilon = 1e-14);

        let q2 = quint(alpha, JumpMeasureSpec::atom(-0.5, p));
        assert_relative_eq!(drift_coefficient(&q2).unwrap(), alpha - 1.5 * p, epsilon = 1e-14);
        assert_relative_eq!(cramer_value(&q2).unwrap(), alpha - 0.5 * p, epsilon = 1e-14);
    }

    #[test]
    fn overshoot_condition_boundary() {
        assert!(check_overshoot_condition(&LevyTriplet::brownian(0.5, 0.0)).unwrap());
        assert!(!check_overshoot_condition(&LevyTriplet::brownian(0.0, 0.0)).unwrap());
        assert!(!check_overshoot_condition(&LevyTriplet::brownian(-0.5, 0.0)).unwrap());
    }

    #[test]
    fn bar_pi_piecewise_assembly() {
        let p = 0.6;
        let t = LevyTriplet::new(0.0, 0.0, JumpMeasureSpec::zero(), 0.3).unwrap();
        let q = Quintuple::new(t, JumpMeasureSpec::atom(-1.0, p)).unwrap();
        let bp = build_bar_pi(&q, 0.0).unwrap();
        assert!(bp.positive_part.is_zero());
        assert_eq!(bp.zero_atom, 0.3);
        assert_eq!(bp.negative_part, q.v);
        assert_eq!(bp.negative_part.total_mass(), p);
    }

    #[test]
    fn bar_pi_pushes_atoms_through_exp() {
        let m0 = 0.9;
        let t = LevyTriplet::new(0.0, 0.0, JumpMeasureSpec::atom(-(2f64.ln()), m0), 0.0).unwrap();
        let q = Quintuple::new(t, JumpMeasureSpec::zero()).unwrap();
        let bp = build_bar_pi(&q, 0.0).unwrap();
        assert_eq!(bp.positive_part.atoms.len(), 1);
        assert_relative_eq!(bp.positive_part.atoms[0].location, 0.5, epsilon = 1e-15);
        assert_eq!(bp.positive_part.atoms[0].mass, m0);
    }

    #[test]
    fn bar_pi_rejects_cutoff_one() {
        let q = quint(1.0, JumpMeasureSpec::zero());
        assert!(matches!(build_bar_pi(&q, 1.0), Err(Error::Config { .. })));
    }

    #[test]
    fn bar_pi_second_moment_matches_direct_quadrature() {
        let (c, alpha) = (0.8, 1.5);
        let pi = JumpMeasureSpec::zero().with_density(Density::truncated_stable(c, alpha));
        let t = LevyTriplet::new(0.0, 1.0, pi, 0.25).unwrap();
        let v = JumpMeasureSpec::atom(-0.5, 0.5).with_density(Density::uniform(0.2, -1.0, -0.1));
        let q = Quintuple::new(t, v).unwrap();
        let bp = build_bar_pi(&q, 1e-4).unwrap();
        let m2 = bp.second_moment_about_one().unwrap();
        // independent: ∫_0^1 (e^{-w}-1)^2 c w^{-1-α} dw by substitution w = s^2
        let f = |s: f64| {
            let w = s * s;
            (-w).exp_m1().powi(2) * c * w.powf(-1.0 - alpha) * 2.0 * s
        };
        let stable_part = quad::integrate_toward(&f, 0.0, 1.0, 0.0).unwrap();
        let v_part = 0.5 * 1.5 * 1.5 + 0.2 * ((2.0f64.powi(3) - 1.1f64.powi(3)) / 3.0);
        assert_relative_eq!(m2, stable_part + 0.25 + v_part, max_relative = 1e-9);
        assert!(m2.is_finite());
        // the bound 2V + Π((-∞,-1]) + C∫u²Π holds with C = 1 on (-1, 0)
        let u2: f64 = c / (2.0 - alpha);
        assert!(stable_part <= u2);
    }

    #[test]
    fn neglected_band_drift() {
        let (c, alpha) = (1.0, 0.5);
        let pi = JumpMeasureSpec::zero().with_density(Density::truncated_stable(c, alpha));
        let q = Quintuple::new(LevyTriplet::new(0.0, 0.0, pi, 0.0).unwrap(), JumpMeasureSpec::zero())
            .unwrap();
        let cut = 1e-2;
        let bp = build_bar_pi(&q, cut).unwrap();
        // ∫_{ln(1-cut)}^0 (e^x - 1) c |x|^{-1-α} dx, integrand ~ -c w^{-α}
        let w0 = -(1.0 - cut).ln();
        let g = |w: f64| (-w).exp_m1() * c * w.powf(-1.0 - alpha);
        let direct = quad::integrate_toward(&g, 0.0, w0, 0.0).unwrap();
        assert_relative_eq!(bp.neglected_drift, direct, max_relative = 1e-9);
        assert!(bp.neglected_drift < 0.0);
    }

    #[test]
    fn folded_identity_on_atoms_and_densities() {
        let pi = JumpMeasureSpec::atom(-0.4, 0.3).with_density(Density::exponential(0.5, 3.0));
        let t = LevyTriplet::with_psi1(1.0, 2.0, pi, 0.1).unwrap();
        let v = JumpMeasureSpec::atom(-0.5, 0.5)
            .with_atom(-1.0, 0.2)
            .with_atom(-0.1, 0.05)
            .with_density(Density::uniform(0.3, -0.9, -0.2));
        let q = Quintuple::new(t, v).unwrap();
        let folded = folded_triplet(&q).unwrap();
        let lhs = laplace_exponent(&folded, 1.0).unwrap();
        assert_relative_eq!(lhs, cramer_value(&q).unwrap(), max_relative = 1e-9);
    }

    #[test]
    fn with_psi1_hits_target() {
        let pi = JumpMeasureSpec::atom(-(2f64.ln()), 0.5);
        let t = LevyTriplet::with_psi1(1.0, 4.0, pi, 0.0).unwrap();
        assert_relative_eq!(laplace_exponent(&t, 1.0).unwrap(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn image_density_is_pushforward() {
        // e^x image of c e^{βx}: density c u^{β-1} on (0,1)
        let d = Density {
            family: DensityFamily::Exponential { c: 2.0, beta: 3.0 },
            transform: Transform::Exp,
        };
        assert_relative_eq!(d.density_at(0.5), 2.0 * 0.5f64.powf(2.0), epsilon = 1e-14);
        let m = JumpMeasureSpec::zero().with_density(d);
        assert_relative_eq!(m.mass_in(0.0, 0.5), 2.0 / 3.0 * 0.5f64.powi(3), epsilon = 1e-14);
    }

    #[test]
    fn sampler_law_matches_masses() {
        let m = JumpMeasureSpec::atom(-0.5, 1.0).with_density(Density::uniform(1.0, -1.0, -0.6));
        let s = m.sampler(-1.0, 0.0, 0.0).unwrap();
        assert_relative_eq!(s.total_mass(), 1.4, epsilon = 1e-14);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let at_atom = (0..n).filter(|_| s.sample(&mut rng) == -0.5).count();
        let frac = at_atom as f64 / n as f64;
        assert!((frac - 1.0 / 1.4).abs() < 4.0 * (0.2 / n as f64).sqrt() + 1e-3);
    }

    #[test]
    fn infinite_density_needs_cutoff_for_sampling() {
        let m = JumpMeasureSpec::zero().with_density(Density::truncated_stable(1.0, 1.0));
        assert!(m.sampler(-1.0, 0.0, 0.0).is_err());
        let s = m.sampler(-1.0, 0.0, 0.01).unwrap();
        assert_relative_eq!(s.total_mass(), 1.0 * (0.01f64.powf(-1.0) - 1.0), max_relative = 1e-12);
    }

    #[test]
    fn convexity_on_grid() {
        let pi = JumpMeasureSpec::atom(-0.7, 1.0)
            .with_density(Density::truncated_stable(0.5, 1.7))
            .with_density(Density::exponential(1.0, 0.8));
        let t = LevyTriplet::new(-0.5, 0.3, pi, 0.4).unwrap();
        let grid: Vec<f64> = (0..=40).map(|i| i as f64 * 0.05).collect();
        let psi: Vec<f64> = grid.iter().map(|&l| laplace_exponent(&t, l).unwrap()).collect();
        for w in psi.windows(3) {
            let scale = w.iter().map(|v| v.abs()).fold(1.0, f64::max);
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-9 * scale);
        }
    }
}
