//! Independent numerical validation of ERA certificates.
//!
//! Nothing here trusts the solver: Gram matrices are re-checked with the
//! Jacobi eigensolver, SOS identities are re-expanded coefficient by
//! coefficient, boundary signs are sampled geometrically, and convergence
//! claims are tested by direct integration of the vector field.

pub mod contour;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::linalg::min_eig;
use crate::parse::PolySystem;
use crate::poly::Polynomial;
use crate::roa::{reexpand_conditions, reexpand_containment, CertPoly, EraCertificate, SetFn};
use crate::scalar::{real, Scalar};

/// Axis-aligned sampling box.
#[derive(Debug, Clone)]
pub struct BBox<T: Scalar> {
    pub min: Vec<T>,
    pub max: Vec<T>,
}

impl<T: Scalar> BBox<T> {
    /// Centered cube `[-h, h]^n`.
    pub fn cube(nvars: usize, halfwidth: T) -> Self {
        BBox { min: vec![-halfwidth; nvars], max: vec![halfwidth; nvars] }
    }

    pub fn nvars(&self) -> usize {
        self.min.len()
    }

    pub fn diagonal(&self) -> T {
        let mut s = T::zero();
        for (lo, hi) in self.min.iter().zip(&self.max) {
            let d = *hi - *lo;
            s += d * d;
        }
        s.sqrt()
    }

    /// Distance from the origin to the box boundary along a direction.
    fn exit_distance(&self, dir: &[T]) -> T {
        let mut t = T::infinity();
        for ((lo, hi), d) in self.min.iter().zip(&self.max).zip(dir) {
            if d.abs() > real::<T>(1e-30) {
                let bound = if *d > T::zero() { *hi } else { *lo };
                t = t.min(bound / *d);
            }
        }
        t
    }
}

/// Time-stamped states of one integrated trajectory.
#[derive(Debug, Clone)]
pub struct Trajectory<T: Scalar> {
    pub times: Vec<T>,
    pub states: Vec<Vec<T>>,
    /// The state left the escape radius (reported as divergent).
    pub escaped: bool,
}

fn rk4_step<T: Scalar>(sys: &PolySystem<T>, x: &[T], dt: T) -> Vec<T> {
    let half = real::<T>(0.5);
    let sixth = T::one() / real::<T>(6.0);
    let two = real::<T>(2.0);
    let k1 = sys.eval(x);
    let x2: Vec<T> = x.iter().zip(&k1).map(|(xi, k)| *xi + half * dt * *k).collect();
    let k2 = sys.eval(&x2);
    let x3: Vec<T> = x.iter().zip(&k2).map(|(xi, k)| *xi + half * dt * *k).collect();
    let k3 = sys.eval(&x3);
    let x4: Vec<T> = x.iter().zip(&k3).map(|(xi, k)| *xi + dt * *k).collect();
    let k4 = sys.eval(&x4);
    x.iter()
        .enumerate()
        .map(|(i, xi)| *xi + dt * sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]))
        .collect()
}

fn norm2<T: Scalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |a, v| a + *v * *v).sqrt()
}

/// Classical fixed-step RK4 integration, recording every step. A trajectory
/// whose norm exceeds `escape_radius` is cut short and flagged.
pub fn rk4<T: Scalar>(
    sys: &PolySystem<T>,
    x0: &[T],
    dt: T,
    t_end: T,
    escape_radius: T,
) -> Trajectory<T> {
    assert!(dt > T::zero() && t_end >= dt, "need dt > 0 and T >= dt");
    let steps = (t_end / dt).to_f64().unwrap_or(0.0).ceil() as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    let mut t = T::zero();
    times.push(t);
    states.push(x.clone());
    for _ in 0..steps {
        x = rk4_step(sys, &x, dt);
        t += dt;
        times.push(t);
        states.push(x.clone());
        if norm2(&x) > escape_radius || x.iter().any(|v| !v.is_finite()) {
            return Trajectory { times, states, escaped: true };
        }
    }
    Trajectory { times, states, escaped: false }
}

/// Final state only (no storage); returns `(state, escaped)`.
pub fn rk4_final<T: Scalar>(
    sys: &PolySystem<T>,
    x0: &[T],
    dt: T,
    t_end: T,
    escape_radius: T,
) -> (Vec<T>, bool) {
    let steps = (t_end / dt).to_f64().unwrap_or(0.0).ceil() as usize;
    let mut x = x0.to_vec();
    for _ in 0..steps {
        x = rk4_step(sys, &x, dt);
        if norm2(&x) > escape_radius || x.iter().any(|v| !v.is_finite()) {
            return (x, true);
        }
    }
    (x, false)
}

fn random_direction<T: Scalar>(rng: &mut ChaCha8Rng, nvars: usize) -> Vec<T> {
    // Box-Muller normals, normalized.
    loop {
        let mut d = Vec::with_capacity(nvars);
        for _ in 0..nvars {
            let u1: f64 = rng.gen_range(1e-12..1.0);
            let u2: f64 = rng.gen_range(0.0..1.0);
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            d.push(real::<T>(z));
        }
        let n = norm2(&d);
        if n > real::<T>(1e-9) {
            return d.iter().map(|v| *v / n).collect();
        }
    }
}

/// Result of boundary sampling.
#[derive(Debug, Clone)]
pub struct BoundarySample<T: Scalar> {
    pub points: Vec<Vec<T>>,
    /// Rays that never crossed the level inside the box.
    pub misses: usize,
}

/// Samples points on `{R = gamma}` by bisecting along random rays from the
/// origin until `|R(z) - gamma| <= 1e-9`. Rays that never cross inside the
/// box are resampled, up to `50 n` attempts in total.
pub fn sample_boundary<T: Scalar>(
    set: &SetFn<T>,
    gamma: T,
    n: usize,
    bbox: &BBox<T>,
    rng: &mut ChaCha8Rng,
) -> BoundarySample<T> {
    let nvars = set.nvars();
    let origin = vec![T::zero(); nvars];
    assert!(set.eval(&origin) < gamma, "origin must be interior to the set");
    let mut points = Vec::with_capacity(n);
    let mut misses = 0usize;
    let mut attempts = 0usize;
    let scan_steps = 64;
    let tol = real::<T>(1e-9);
    while points.len() < n && attempts < 50 * n {
        attempts += 1;
        let dir = random_direction::<T>(rng, nvars);
        let t_max = bbox.exit_distance(&dir);
        if !t_max.is_finite() || t_max <= T::zero() {
            misses += 1;
            continue;
        }
        let eval_at = |t: T| {
            let z: Vec<T> = dir.iter().map(|d| *d * t).collect();
            set.eval(&z) - gamma
        };
        let mut bracket = None;
        let mut t_prev = T::zero();
        for k in 1..=scan_steps {
            let t = t_max * real::<T>(k as f64 / scan_steps as f64);
            if eval_at(t) >= T::zero() {
                bracket = Some((t_prev, t));
                break;
            }
            t_prev = t;
        }
        let (mut lo, mut hi) = match bracket {
            Some(b) => b,
            None => {
                misses += 1;
                continue;
            }
        };
        let mut found = None;
        for _ in 0..200 {
            let mid = (lo + hi) * real::<T>(0.5);
            let v = eval_at(mid);
            if v.abs() <= tol {
                found = Some(mid);
                break;
            }
            if v > T::zero() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        match found {
            Some(t) => points.push(dir.iter().map(|d| *d * t).collect()),
            None => misses += 1,
        }
    }
    BoundarySample { points, misses }
}

/// Verification knobs (defaults follow the module contract).
#[derive(Debug, Clone)]
pub struct VerifyConfig<T: Scalar> {
    pub boundary_samples: usize,
    pub interior_samples: usize,
    pub dt: T,
    pub t_horizon: T,
    pub conv_tol: T,
    pub bbox_halfwidth: T,
    pub seed: u64,
    /// Grid resolution for the 2-D contour attached to the report
    /// (0 disables).
    pub contour_resolution: usize,
}

impl<T: Scalar> Default for VerifyConfig<T> {
    fn default() -> Self {
        VerifyConfig {
            boundary_samples: 200,
            interior_samples: 200,
            dt: real(0.01),
            t_horizon: real(100.0),
            conv_tol: real(1e-3),
            bbox_halfwidth: real(10.0),
            seed: 0,
            contour_resolution: 0,
        }
    }
}

/// One named check with its verdict and a human-readable detail line.
#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Report of all enabled checks; `pass()` requires zero violations.
#[derive(Debug, Clone)]
pub struct VerificationReport<T: Scalar> {
    pub checks: Vec<CheckOutcome>,
    pub boundary_count: usize,
    /// Worst (largest) sampled boundary Lie derivative of the set function.
    pub boundary_worst: T,
    pub convergence_fraction: T,
    pub containment_violations: usize,
    /// Level-set polylines when the system is 2-D and a resolution was set.
    pub contours: Vec<Vec<[T; 2]>>,
}

impl<T: Scalar> VerificationReport<T> {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

fn all_grams<'a, T: Scalar>(cert: &'a EraCertificate<T>) -> Vec<(String, &'a CertPoly<T>)> {
    let mut out: Vec<(String, &CertPoly<T>)> = Vec::new();
    for (i, m) in cert.mults.iter().enumerate() {
        let tag = |base: &str| {
            if cert.mults.len() > 1 {
                format!("{}_{}", base, i + 1)
            } else {
                base.to_string()
            }
        };
        out.push((tag("m0"), &m.m0));
        out.push((tag("m1"), &m.m1));
        if let Some(m2) = &m.m2 {
            out.push((tag("m2"), m2));
        }
        for (k, s) in m.s_invariance.iter().enumerate() {
            out.push((format!("{}_{}", tag("s_inv"), k), s));
        }
        for (k, s) in m.s_positivity.iter().enumerate() {
            out.push((format!("{}_{}", tag("s_pos"), k), s));
        }
        for (k, s) in m.s_decrease.iter().enumerate() {
            out.push((format!("{}_{}", tag("s_dec"), k), s));
        }
        for (k, s) in m.s_rational.iter().enumerate() {
            out.push((format!("{}_{}", tag("s_rat"), k), s));
        }
    }
    for (k, link) in cert.m3_chain.iter().enumerate() {
        out.push((format!("m3_{}", k), &link.m3));
    }
    out
}

/// Runs every enabled check against a certificate:
/// (a) boundary derivative signs, (b) interior convergence by integration,
/// (c) Gram PSD re-verification, (d) SOS identity re-expansion, plus the
/// containment chain and the rational decrease when an `m2` is present.
pub fn check_certificate<T: Scalar>(
    sys: &PolySystem<T>,
    cert: &EraCertificate<T>,
    vcfg: &VerifyConfig<T>,
) -> VerificationReport<T> {
    let n = cert.nvars();
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(vcfg.seed);
    let bbox = BBox::cube(n, vcfg.bbox_halfwidth);

    // (c) Gram PSD for every stored certificate matrix.
    {
        let mut worst = T::infinity();
        let mut worst_name = String::new();
        for (name, cp) in all_grams(cert) {
            if let Some(g) = &cp.gram {
                let ev = min_eig(&g.q);
                if ev < worst {
                    worst = ev;
                    worst_name = name.clone();
                }
            }
        }
        for cond in &cert.conditions {
            for g in &cond.grams {
                let ev = min_eig(&g.q);
                if ev < worst {
                    worst = ev;
                    worst_name = cond.name.clone();
                }
            }
        }
        for (k, link) in cert.m3_chain.iter().enumerate() {
            for g in &link.cond.grams {
                let ev = min_eig(&g.q);
                if ev < worst {
                    worst = ev;
                    worst_name = format!("containment_{}", k);
                }
            }
        }
        let passed = worst >= real::<T>(-1e-7);
        let detail = if worst.is_infinite() {
            "no Gram matrices stored".to_string()
        } else {
            format!("min eigenvalue {:e} ({})", worst.to_f64().unwrap_or(f64::NAN), worst_name)
        };
        checks.push(CheckOutcome { name: "gram_psd".into(), passed, detail });
    }

    // (d) SOS identity re-expansion against the stored Grams.
    {
        let mut worst = T::zero();
        let mut worst_name = String::new();
        for (name, expr) in reexpand_conditions(cert, sys) {
            if let Some(cond) = cert.condition(&name) {
                let diff = expr.max_coeff_diff(&cond.to_poly(n));
                if diff > worst {
                    worst = diff;
                    worst_name = name.clone();
                }
            }
        }
        for link in &cert.m3_chain {
            let diff = reexpand_containment(link).max_coeff_diff(&link.cond.to_poly(n));
            if diff > worst {
                worst = diff;
                worst_name = "containment".into();
            }
        }
        let passed = worst <= real::<T>(1e-6);
        checks.push(CheckOutcome {
            name: "sos_identity".into(),
            passed,
            detail: format!(
                "max coefficient mismatch {:e}{}",
                worst.to_f64().unwrap_or(f64::NAN),
                if worst_name.is_empty() { String::new() } else { format!(" ({})", worst_name) }
            ),
        });
    }

    // Origin strictly interior: R(0) < gamma (numerical epsilon-bar check).
    {
        let origin = vec![T::zero(); n];
        let r0 = cert.set.eval(&origin);
        let slack = cert.gamma * real::<T>(1e-6);
        let passed = r0 <= cert.gamma - slack;
        checks.push(CheckOutcome {
            name: "origin_interior".into(),
            passed,
            detail: format!(
                "R(0) = {:e}, gamma = {:e}",
                r0.to_f64().unwrap_or(f64::NAN),
                cert.gamma.to_f64().unwrap_or(f64::NAN)
            ),
        });
    }

    // (a) Boundary derivative signs.
    let boundary = sample_boundary(&cert.set, cert.gamma, vcfg.boundary_samples, &bbox, &mut rng);
    let mut boundary_worst = T::neg_infinity();
    {
        let act_tol = real::<T>(1e-7) * (T::one() + cert.gamma.abs());
        let mut violations = 0usize;
        for z in &boundary.points {
            let margin_here = Polynomial::sum_sq_vars(n)
                .evaluate(z)
                .mul(cert.eps_margin * real::<T>(0.5));
            for i in cert.set.active_pieces(z, act_tol) {
                let lie = cert.set.pieces()[i].lie_derivative(&sys.f).evaluate(z);
                boundary_worst = boundary_worst.max(lie);
                if lie > -margin_here {
                    violations += 1;
                }
            }
        }
        let passed = violations == 0 && !boundary.points.is_empty();
        checks.push(CheckOutcome {
            name: "boundary_decrease".into(),
            passed,
            detail: format!(
                "{} samples ({} misses), worst <grad R, f> = {:e}, {} violations",
                boundary.points.len(),
                boundary.misses,
                boundary_worst.to_f64().unwrap_or(f64::NAN),
                violations
            ),
        });
    }

    // (b) Interior convergence by direct integration. Samples are drawn
    // uniformly in E(R, 0.98 gamma) by rejection inside a bounding ball.
    let convergence_fraction;
    {
        let shrink = real::<T>(0.98);
        let radius = boundary
            .points
            .iter()
            .map(|z| norm2(z))
            .fold(T::zero(), |a, v| a.max(v))
            .max(real::<T>(1e-3))
            * real::<T>(1.2);
        let escape = bbox.diagonal() * real::<T>(10.0);
        let mut converged = 0usize;
        let mut escaped_inside = 0usize;
        let mut sampled = 0usize;
        let mut attempts = 0usize;
        let max_attempts = 1000 * vcfg.interior_samples;
        while sampled < vcfg.interior_samples && attempts < max_attempts {
            attempts += 1;
            let dir = random_direction::<T>(&mut rng, n);
            let u: f64 = rng.gen_range(0.0f64..1.0);
            let t = radius * real::<T>(u.powf(1.0 / n as f64));
            let z: Vec<T> = dir.iter().map(|d| *d * t).collect();
            if cert.set.eval(&z) > cert.gamma * shrink {
                continue;
            }
            sampled += 1;
            let (xf, escaped) = rk4_final(sys, &z, vcfg.dt, vcfg.t_horizon, escape);
            if escaped {
                escaped_inside += 1;
            } else if norm2(&xf) < vcfg.conv_tol {
                converged += 1;
            }
        }
        convergence_fraction = if sampled > 0 {
            real::<T>(converged as f64 / sampled as f64)
        } else {
            T::zero()
        };
        let passed =
            sampled == vcfg.interior_samples && converged == sampled && escaped_inside == 0;
        checks.push(CheckOutcome {
            name: "interior_convergence".into(),
            passed,
            detail: format!(
                "{}/{} converged (|x(T)| < {:e}), {} escaped",
                converged,
                sampled,
                vcfg.conv_tol.to_f64().unwrap_or(f64::NAN),
                escaped_inside
            ),
        });
    }

    // Containment chain: sampled inclusion of each link.
    let mut containment_violations = 0usize;
    if !cert.m3_chain.is_empty() {
        for link in &cert.m3_chain {
            let prev_set = SetFn::Single(link.prev_r.clone());
            let inner = sample_boundary(&prev_set, link.prev_gamma, 50, &bbox, &mut rng);
            for z in &inner.points {
                if link.r.evaluate(z) > link.gamma + real::<T>(1e-7) {
                    containment_violations += 1;
                }
            }
        }
        checks.push(CheckOutcome {
            name: "containment_chain".into(),
            passed: containment_violations == 0,
            detail: format!(
                "{} links, {} sampled violations",
                cert.m3_chain.len(),
                containment_violations
            ),
        });
    }

    // Rational Lyapunov decrease along trajectories when m2 is present.
    if cert.mults.iter().any(|m| m.m2.is_some()) {
        let shrink = real::<T>(0.9);
        let radius = boundary
            .points
            .iter()
            .map(|z| norm2(z))
            .fold(T::zero(), |a, v| a.max(v))
            .max(real::<T>(1e-3));
        let escape = bbox.diagonal() * real::<T>(10.0);
        let v_of = |z: &[T]| {
            let denom = cert.gamma - cert.set.eval(z);
            cert.v_n.evaluate(z) / denom
        };
        let mut bad_steps = 0usize;
        let mut trajectories = 0usize;
        let mut attempts = 0;
        while trajectories < 20 && attempts < 4000 {
            attempts += 1;
            let dir = random_direction::<T>(&mut rng, n);
            let u: f64 = rng.gen_range(0.0f64..1.0);
            let t = radius * real::<T>(u.powf(1.0 / n as f64));
            let z: Vec<T> = dir.iter().map(|d| *d * t).collect();
            if cert.set.eval(&z) > cert.gamma * shrink || norm2(&z) < real::<T>(1e-2) {
                continue;
            }
            trajectories += 1;
            let traj = rk4(sys, &z, vcfg.dt, vcfg.t_horizon, escape);
            let mut prev = v_of(&traj.states[0]);
            for state in traj.states.iter().skip(1) {
                if norm2(state) < real::<T>(1e-2) {
                    break;
                }
                let cur = v_of(state);
                if cur > prev + real::<T>(1e-10) * (T::one() + prev.abs()) {
                    bad_steps += 1;
                }
                prev = cur;
            }
        }
        checks.push(CheckOutcome {
            name: "rational_decrease".into(),
            passed: bad_steps == 0 && trajectories == 20,
            detail: format!(
                "{} trajectories, {} increasing steps of V = V_N/(gamma - R)",
                trajectories, bad_steps
            ),
        });
    }

    // Optional contour extraction for the report (2-D only).
    let contours = if n == 2 && vcfg.contour_resolution > 1 {
        let set = cert.set.clone();
        contour::contour2d(
            |x: &[T]| set.eval(x),
            cert.gamma,
            &bbox,
            vcfg.contour_resolution,
        )
    } else {
        Vec::new()
    };

    VerificationReport {
        checks,
        boundary_count: boundary.points.len(),
        boundary_worst,
        convergence_fraction,
        containment_violations,
        contours,
    }
}

#[cfg(test)]
mod tests;
