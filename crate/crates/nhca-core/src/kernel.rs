//! Calderón–Zygmund kernels, smooth truncations and envelope composites.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{range, Error, Result};
use crate::geometry::{enclosing, inrdist};
use crate::grid::{pow2, Cube};
use crate::measure::{density_profile, AtomicMeasure, RhoInMode};
use crate::reduce::pairwise_sum;

pub type KernelFn = Arc<dyn Fn(&[f64], &[f64]) -> Complex64 + Send + Sync>;
pub type EnvelopeFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Cutoff profile: 1 on `[0,1]`, cubic smoothstep down to 0 on `[1,2]`.
#[inline]
pub fn phi(r: f64) -> f64 {
    let r = r.abs();
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let u = r - 1.0;
        1.0 - u * u * (3.0 - 2.0 * u)
    }
}

/// `φ'` on `r >= 0`; `|φ'| <= 3/2`.
#[inline]
pub fn phi_prime(r: f64) -> f64 {
    if r <= 1.0 || r >= 2.0 {
        0.0
    } else {
        let u = r - 1.0;
        -6.0 * u * (1.0 - u)
    }
}

#[derive(Clone)]
pub enum BaseKernel {
    /// `K(w, z) = 1 / (w − z)` on `R^2 ≅ C`.
    Cauchy,
    Constant(Complex64),
    Custom { name: String, eval: KernelFn },
}

impl fmt::Debug for BaseKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BaseKernel::Cauchy => f.write_str("Cauchy"),
            BaseKernel::Constant(c) => write!(f, "Constant({c})"),
            BaseKernel::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl BaseKernel {
    /// Singular at `t = x`.
    fn is_singular(&self) -> bool {
        !matches!(self, BaseKernel::Constant(_))
    }

    #[inline]
    fn raw(&self, t: &[f64], x: &[f64]) -> Complex64 {
        match self {
            BaseKernel::Cauchy => Complex64::new(t[0] - x[0], t[1] - x[1]).inv(),
            BaseKernel::Constant(c) => *c,
            BaseKernel::Custom { eval, .. } => eval(t, x),
        }
    }
}

/// `(γ, Q)` with `Q = [−2^N, 2^N]^n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Truncation {
    pub gamma: f64,
    pub big_n: i32,
}

impl Truncation {
    pub fn new(gamma: f64, big_n: i32) -> Result<Self> {
        let t = Self { gamma, big_n };
        if !(gamma > 0.0 && gamma < t.q_side()) {
            return Err(range(format!("gamma {gamma} must lie in (0, {}) ", t.q_side())));
        }
        Ok(t)
    }

    pub fn q_side(&self) -> f64 {
        pow2(self.big_n + 1)
    }

    /// Spatial factor `φ(4|x| / ℓ(Q))`.
    #[inline]
    pub fn spatial(&self, x: &[f64]) -> f64 {
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        phi(4.0 * r / self.q_side())
    }

    /// Near-diagonal factor `1 − φ(|t − x| / γ)`.
    #[inline]
    pub fn radial(&self, dist: f64) -> f64 {
        1.0 - phi(dist / self.gamma)
    }
}

/// Declared monotonicity of an envelope.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Monotone {
    NonIncreasing,
    NonDecreasing,
}

#[derive(Clone)]
pub enum Envelope {
    Constant(f64),
    /// `min(1, r^{-s})`.
    PowerDecay(f64),
    /// `min(1, r^{s})`.
    PowerGrowth(f64),
    /// `1 / (1 + ln max(r, 1))`.
    LogDecay,
    Custom {
        name: String,
        f: EnvelopeFn,
        ceiling: f64,
        monotone: Monotone,
    },
}

impl fmt::Debug for Envelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Envelope::Constant(c) => write!(f, "Constant({c})"),
            Envelope::PowerDecay(s) => write!(f, "PowerDecay({s})"),
            Envelope::PowerGrowth(s) => write!(f, "PowerGrowth({s})"),
            Envelope::LogDecay => f.write_str("LogDecay"),
            Envelope::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

impl Envelope {
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        match self {
            Envelope::Constant(c) => *c,
            Envelope::PowerDecay(s) => r.powf(-s).min(1.0),
            Envelope::PowerGrowth(s) => r.powf(*s).min(1.0),
            Envelope::LogDecay => 1.0 / (1.0 + r.max(1.0).ln()),
            Envelope::Custom { f, .. } => f(r),
        }
    }

    pub fn ceiling(&self) -> f64 {
        match self {
            Envelope::Constant(c) => *c,
            Envelope::Custom { ceiling, .. } => *ceiling,
            _ => 1.0,
        }
    }

    fn monotone(&self) -> Option<Monotone> {
        match self {
            Envelope::Constant(_) => None,
            Envelope::PowerDecay(_) | Envelope::LogDecay => Some(Monotone::NonIncreasing),
            Envelope::PowerGrowth(_) => Some(Monotone::NonDecreasing),
            Envelope::Custom { monotone, .. } => Some(*monotone),
        }
    }

    /// Spot-checks boundedness and the required monotonicity on a log grid.
    pub fn validate(&self, name: &str, required: Monotone) -> Vec<String> {
        let mut problems = Vec::new();
        let ceiling = self.ceiling();
        if !(ceiling.is_finite() && ceiling >= 0.0) {
            problems.push(format!("{name}: ceiling {ceiling} is not a finite bound"));
            return problems;
        }
        if let Some(m) = self.monotone() {
            if m != required {
                problems.push(format!("{name}: declared {m:?}, required {required:?}"));
            }
        }
        let mut prev: Option<f64> = None;
        for i in -160..=160 {
            let r = pow2(i) * 1.0001;
            let v = self.eval(r);
            if !v.is_finite() || v < 0.0 || v > ceiling * (1.0 + 1e-12) {
                problems.push(format!("{name}({r:e}) = {v} exceeds bound {ceiling}"));
                break;
            }
            if let Some(p) = prev {
                let ok = match required {
                    Monotone::NonIncreasing => v <= p * (1.0 + 1e-12),
                    Monotone::NonDecreasing => v * (1.0 + 1e-12) >= p,
                };
                if !ok {
                    problems.push(format!("{name} is not {required:?} near r = {r:e}"));
                    break;
                }
            }
            prev = Some(v);
        }
        problems
    }
}

/// The envelope triple `(L, S, D)`.
#[derive(Clone, Debug)]
pub struct Envelopes {
    pub l: Envelope,
    pub s: Envelope,
    pub d: Envelope,
}

impl Default for Envelopes {
    fn default() -> Self {
        Self {
            l: Envelope::Constant(1.0),
            s: Envelope::Constant(1.0),
            d: Envelope::Constant(1.0),
        }
    }
}

impl Envelopes {
    pub fn validate(&self) -> Result<()> {
        let mut problems = self.l.validate("L", Monotone::NonIncreasing);
        problems.extend(self.s.validate("S", Monotone::NonDecreasing));
        problems.extend(self.d.validate("D", Monotone::NonIncreasing));
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

#[derive(Clone, Debug)]
pub struct KernelSpec {
    pub base: BaseKernel,
    pub alpha: f64,
    pub delta: f64,
    pub c_k: f64,
    pub envelopes: Envelopes,
    pub truncation: Option<Truncation>,
    pub compact: bool,
}

impl KernelSpec {
    pub fn cauchy() -> Self {
        Self {
            base: BaseKernel::Cauchy,
            alpha: 1.0,
            delta: 1.0,
            c_k: 2.0,
            envelopes: Envelopes::default(),
            truncation: None,
            compact: false,
        }
    }

    pub fn constant(c: Complex64) -> Self {
        Self {
            base: BaseKernel::Constant(c),
            alpha: 1.0,
            delta: 1.0,
            c_k: 0.0,
            envelopes: Envelopes::default(),
            truncation: None,
            compact: false,
        }
    }

    pub fn custom(name: impl Into<String>, eval: KernelFn, alpha: f64, delta: f64, c_k: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0 && alpha > 0.0) {
            return Err(Error::Validation(vec![format!("bad parameters alpha {alpha}, delta {delta}")]));
        }
        Ok(Self {
            base: BaseKernel::Custom { name: name.into(), eval },
            alpha,
            delta,
            c_k,
            envelopes: Envelopes::default(),
            truncation: None,
            compact: false,
        })
    }

    pub fn with_envelopes(mut self, envelopes: Envelopes) -> Result<Self> {
        envelopes.validate()?;
        self.envelopes = envelopes;
        Ok(self)
    }

    pub fn with_delta(mut self, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta <= 1.0) {
            return Err(range(format!("delta {delta} not in (0, 1]")));
        }
        self.delta = delta;
        Ok(self)
    }

    pub fn truncate(&self, t: Truncation) -> Result<Self> {
        if !(t.gamma > 0.0 && t.gamma < t.q_side()) {
            return Err(range(format!("gamma {} must lie in (0, {})", t.gamma, t.q_side())));
        }
        let mut k = self.clone();
        k.truncation = Some(t);
        Ok(k)
    }

    pub fn name(&self) -> String {
        match (&self.base, &self.truncation) {
            (BaseKernel::Cauchy, None) => "cauchy".into(),
            (BaseKernel::Cauchy, Some(t)) => format!("cauchy-trunc({},{})", t.gamma, t.big_n),
            (b, None) => format!("{b:?}"),
            (b, Some(t)) => format!("{b:?}-trunc({},{})", t.gamma, t.big_n),
        }
    }

    /// `K(t, x)`; the diagonal of a singular untruncated kernel is an error.
    pub fn evaluate(&self, t: &[f64], x: &[f64]) -> Result<Complex64> {
        match &self.truncation {
            None => {
                if self.base.is_singular() && t == x {
                    return Err(Error::Diagonal { atom: usize::MAX });
                }
                Ok(self.base.raw(t, x))
            }
            Some(tr) => Ok(self.truncated(tr, t, x, tr.spatial(t), tr.spatial(x))),
        }
    }

    /// Truncated value with precomputed spatial factors.
    #[inline]
    pub fn truncated(&self, tr: &Truncation, t: &[f64], x: &[f64], st: f64, sx: f64) -> Complex64 {
        let scale = st * sx;
        if scale == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let d = dist(t, x);
        let rad = tr.radial(d);
        if rad == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        self.base.raw(t, x) * (rad * scale)
    }

    /// Per-atom spatial factors, all 1 without truncation.
    pub fn spatial_factors(&self, mu: &AtomicMeasure) -> Vec<f64> {
        match &self.truncation {
            None => vec![1.0; mu.len()],
            Some(tr) => (0..mu.len()).map(|i| tr.spatial(mu.point(i))).collect(),
        }
    }

    /// Envelope product `F(t, x) = L(|t−x|) S(|t−x|) D(|t+x|)`.
    pub fn envelope_at(&self, t: &[f64], x: &[f64]) -> f64 {
        let r = dist(t, x);
        let s: f64 = t.iter().zip(x).map(|(a, b)| (a + b) * (a + b)).sum::<f64>().sqrt();
        self.envelopes.l.eval(r) * self.envelopes.s.eval(r) * self.envelopes.d.eval(s)
    }
}

#[inline]
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt()
}

/// A truncated evaluation with a certified bound on the omitted tail.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Certified {
    pub value: f64,
    pub tail_bound: f64,
    pub terms: usize,
}

const SERIES_TOL: f64 = 1e-14;
const SERIES_MAX: usize = 400;

/// The envelope composites.
#[derive(Clone, Debug)]
pub struct EnvelopeCtx<'a> {
    pub env: &'a Envelopes,
    pub alpha: f64,
    pub delta: f64,
}

impl<'a> EnvelopeCtx<'a> {
    pub fn of(k: &'a KernelSpec) -> Self {
        Self {
            env: &k.envelopes,
            alpha: k.alpha,
            delta: k.delta,
        }
    }

    fn unit(dim: usize) -> Cube {
        Cube::origin_box(1.0, dim)
    }

    /// `L(ℓ(I1)) S(ℓ(I2)) D(rdist(I3, 𝔹))`.
    pub fn f_triple(&self, i1: &Cube, i2: &Cube, i3: &Cube) -> f64 {
        self.env.l.eval(i1.side) * self.env.s.eval(i2.side) * self.env.d.eval(i3.rdist(&Self::unit(i3.dim())))
    }

    /// `Σ_k 2^{-kδ/2} D(rdist(2^k I, 𝔹))`.
    pub fn d_tilde(&self, i: &Cube) -> Certified {
        let ratio = 2f64.powf(-0.5 * self.delta);
        self.d_series(i, ratio, |_| 1.0, self.env.d.ceiling())
    }

    /// `Σ_k ratio^k w(k) D(rdist(2^k I, 𝔹))` with `w(k) <= w_bound` for the
    /// tail certificate.
    fn d_series(&self, i: &Cube, ratio: f64, weight: impl Fn(usize) -> f64, w_bound: f64) -> Certified {
        let unit = Self::unit(i.dim());
        let d_max = self.env.d.ceiling();
        let mut terms = Vec::new();
        let mut r = 1.0;
        let mut tail = f64::INFINITY;
        let mut running = 0.0;
        for k in 0..SERIES_MAX {
            let c = i.dilate(pow2(k as i32));
            let term = r * weight(k) * self.env.d.eval(c.rdist(&unit));
            running += term;
            terms.push(term);
            r *= ratio;
            tail = d_max * w_bound * r / (1.0 - ratio);
            if tail <= SERIES_TOL * running || tail < 1e-300 {
                break;
            }
        }
        Certified {
            value: pairwise_sum(terms.iter().copied()),
            tail_bound: tail,
            terms: terms.len(),
        }
    }

    /// `F_K(I, J) = L(ℓ(I∧J)) S(ℓ(I∧J)) (D(rdist(⟨I,J⟩, 𝔹)) + D̃(inrdist(I,J)·(I∧J)))`.
    pub fn f_k(&self, i: &Cube, j: &Cube) -> Certified {
        let meet = if j.side <= i.side { j } else { i };
        let enc = enclosing(i, j);
        let scaled = meet.dilate(inrdist(i, j));
        let dt = self.d_tilde(&scaled);
        let front = self.env.l.eval(meet.side) * self.env.s.eval(meet.side);
        Certified {
            value: front * (self.env.d.eval(enc.rdist(&Self::unit(i.dim()))) + dt.value),
            tail_bound: front * dt.tail_bound,
            terms: dt.terms,
        }
    }

    /// `L(ℓ([I_p,J_p])) S(ℓ(I_p∧J_p)) D(rdist(⟨I_p,J_p⟩, 𝔹))` from the parents.
    pub fn f1(&self, ip: &Cube, jp: &Cube) -> f64 {
        let between = ip.dist(jp);
        let meet = ip.side.min(jp.side);
        let enc = enclosing(ip, jp);
        self.env.l.eval(between) * self.env.s.eval(meet) * self.env.d.eval(enc.rdist(&Self::unit(ip.dim())))
    }

    /// `K = inrdist(I_p, J_p)·(I∧J)`.
    fn k_cube(i: &Cube, j: &Cube, ip: &Cube, jp: &Cube) -> Cube {
        let meet = if j.side <= i.side { j } else { i };
        meet.dilate(inrdist(ip, jp))
    }

    /// `L S Σ_k 2^{-kδ} μ(2^k K)/ℓ(2^k K)^α D(rdist(2^k K, 𝔹))`.
    pub fn f2mu(&self, mu: &AtomicMeasure, i: &Cube, j: &Cube, ip: &Cube, jp: &Cube) -> Certified {
        let k = Self::k_cube(i, j, ip, jp);
        let meet = i.side.min(j.side);
        let front = self.env.l.eval(meet) * self.env.s.eval(meet);
        let total = mu.total_mass();
        let alpha = self.alpha;
        let side = k.side;
        let ratio = 2f64.powf(-self.delta);
        // μ(2^k K)/ℓ(2^k K)^α <= total / ℓ(K)^α
        let density = |m: usize| {
            let c = k.dilate(pow2(m as i32));
            let mass = pairwise_sum((0..mu.len()).filter(|&a| c.contains(mu.point(a))).map(|a| mu.weight(a)));
            mass / c.side.powf(alpha)
        };
        let c = self.d_series(&k, ratio, density, total / side.powf(alpha));
        Certified {
            value: front * c.value,
            tail_bound: front * c.tail_bound,
            terms: c.terms,
        }
    }

    /// `L S Σ_k 2^{-kδ} D(rdist(2^k K, 𝔹))`.
    pub fn f3(&self, i: &Cube, j: &Cube, ip: &Cube, jp: &Cube) -> Certified {
        let k = Self::k_cube(i, j, ip, jp);
        let meet = i.side.min(j.side);
        let front = self.env.l.eval(meet) * self.env.s.eval(meet);
        let c = self.d_series(&k, 2f64.powf(-self.delta), |_| 1.0, 1.0);
        Certified {
            value: front * c.value,
            tail_bound: front * c.tail_bound,
            terms: c.terms,
        }
    }
}

/// Named envelope composites for callers that dispatch on a kind.
#[derive(Clone, Debug)]
pub enum EnvelopeKind<'a> {
    Triple(&'a Cube, &'a Cube, &'a Cube),
    FK(&'a Cube, &'a Cube),
    F1 { ip: &'a Cube, jp: &'a Cube },
    F2mu { mu: &'a AtomicMeasure, i: &'a Cube, j: &'a Cube, ip: &'a Cube, jp: &'a Cube },
    F3 { i: &'a Cube, j: &'a Cube, ip: &'a Cube, jp: &'a Cube },
    DTilde(&'a Cube),
}

pub fn envelope(ctx: &EnvelopeCtx<'_>, kind: &EnvelopeKind<'_>) -> Certified {
    let exact = |value| Certified { value, tail_bound: 0.0, terms: 1 };
    match kind {
        EnvelopeKind::Triple(a, b, c) => exact(ctx.f_triple(a, b, c)),
        EnvelopeKind::FK(i, j) => ctx.f_k(i, j),
        EnvelopeKind::F1 { ip, jp } => exact(ctx.f1(ip, jp)),
        EnvelopeKind::F2mu { mu, i, j, ip, jp } => ctx.f2mu(mu, i, j, ip, jp),
        EnvelopeKind::F3 { i, j, ip, jp } => ctx.f3(i, j, ip, jp),
        EnvelopeKind::DTilde(i) => ctx.d_tilde(i),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SmoothnessReport {
    pub c_emp: f64,
    /// `(t, t', x, x')` attaining `c_emp`.
    pub worst: Option<[Vec<f64>; 4]>,
    pub samples: usize,
    pub regenerated: usize,
}

const PROBE_CHUNK: usize = 1024;

/// Empirical smoothness constant over random admissible triples near atoms.
pub fn smoothness_probe(k: &KernelSpec, mu: &AtomicMeasure, samples: usize, seed: u64) -> Result<SmoothnessReport> {
    if samples < 1000 {
        return Err(Error::Precondition(format!("smoothness_probe needs >= 1000 samples, got {samples}")));
    }
    if mu.is_empty() {
        return Err(Error::Precondition("empty measure".into()));
    }
    let chunks = samples.div_ceil(PROBE_CHUNK);
    let dim = mu.dim();
    let h = mu.resolution();
    let sf = |p: &[f64]| k.truncation.map_or(1.0, |t| t.spatial(p));
    let eval = |t: &[f64], x: &[f64]| match &k.truncation {
        None => k.base.raw(t, x),
        Some(tr) => k.truncated(tr, t, x, sf(t), sf(x)),
    };
    // (largest ratio, points attaining it, regenerated draws)
    type Chunk = (f64, Option<[Vec<f64>; 4]>, usize);
    let results: Vec<Chunk> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c as u64);
            let count = PROBE_CHUNK.min(samples - c * PROBE_CHUNK);
            let mut best = 0.0f64;
            let mut worst = None;
            let mut regen = 0;
            let mut done = 0;
            while done < count {
                let a = rng.random_range(0..mu.len());
                let b = rng.random_range(0..mu.len());
                let jitter = |rng: &mut ChaCha8Rng, p: &[f64]| -> Vec<f64> {
                    p.iter().map(|v| v + h * rng.random_range(-1.0..1.0)).collect()
                };
                let t = jitter(&mut rng, mu.point(a));
                let x = jitter(&mut rng, mu.point(b));
                let r = dist(&t, &x);
                if r < 1e-12 {
                    regen += 1;
                    continue;
                }
                // total displacement below r/2, log-uniform in size
                let total = 0.4999 * r * 10f64.powf(rng.random_range(-6.0..0.0));
                let split: f64 = rng.random_range(0.0..1.0);
                let dir = |rng: &mut ChaCha8Rng, len: f64| -> Vec<f64> {
                    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let n = v.iter().map(|u| u * u).sum::<f64>().sqrt().max(1e-300);
                    v.iter().map(|u| u * len / n).collect()
                };
                let dt = dir(&mut rng, total * split);
                let dx = dir(&mut rng, total * (1.0 - split));
                let t2: Vec<f64> = t.iter().zip(&dt).map(|(a, b)| a + b).collect();
                let x2: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
                let moved = dist(&t, &t2) + dist(&x, &x2);
                done += 1;
                if moved == 0.0 || 2.0 * moved >= r {
                    continue;
                }
                let env = k.envelope_at(&t, &x);
                if env <= 0.0 {
                    continue;
                }
                let diff = (eval(&t, &x) - eval(&t2, &x2)).norm();
                let ratio = diff * r.powf(k.alpha + k.delta) / (moved.powf(k.delta) * env);
                if ratio > best {
                    best = ratio;
                    worst = Some([t, t2, x, x2]);
                }
            }
            (best, worst, regen)
        })
        .collect();
    let mut report = SmoothnessReport {
        c_emp: 0.0,
        worst: None,
        samples,
        regenerated: 0,
    };
    for (best, worst, regen) in results {
        report.regenerated += regen;
        if best > report.c_emp {
            report.c_emp = best;
            report.worst = worst;
        }
    }
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegrableReport {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

/// `Σ_{x_j ∈ I, x_j ≠ x} w_j |x_j − x|^{-(α−1)}` against `ℓ(I) ρ_in(I)`.
pub fn integrable_check(mu: &AtomicMeasure, cube: &Cube, x: &[f64]) -> Result<IntegrableReport> {
    if !cube.contains(x) {
        return Err(Error::Precondition("x must lie in I".into()));
    }
    let p = mu.alpha() - 1.0;
    let lhs = pairwise_sum(
        (0..mu.len())
            .filter(|&j| cube.contains(mu.point(j)) && mu.point(j) != x)
            .map(|j| mu.weight(j) * dist(mu.point(j), x).powf(-p)),
    );
    let prof = density_profile(mu, cube, 1.0, RhoInMode::Balls)?;
    let rhs = cube.side * prof.rho_in;
    Ok(IntegrableReport {
        lhs,
        rhs,
        ratio: if rhs > 0.0 { lhs / rhs } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phi_profile() {
        assert_eq!(phi(0.5), 1.0);
        assert_eq!(phi(1.0), 1.0);
        assert_eq!(phi(2.0), 0.0);
        assert!((phi(1.5) - 0.5).abs() < 1e-15);
        let max = (0..=1000).map(|i| phi_prime(1.0 + i as f64 / 1000.0).abs()).fold(0.0, f64::max);
        assert!((max - 1.5).abs() < 1e-12);
    }

    #[test]
    fn d_tilde_geometric() {
        let env = Envelopes::default();
        let ctx = EnvelopeCtx { env: &env, alpha: 1.0, delta: 1.0 };
        let c = ctx.d_tilde(&Cube::from_lower(&[0.0, 0.0], 1.0));
        assert!((c.value - (2.0 + 2f64.sqrt())).abs() <= c.tail_bound + 1e-13);
    }
}
