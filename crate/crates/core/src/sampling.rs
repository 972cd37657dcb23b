//! Deterministic low-discrepancy sampling for suprema over balls and minima
//! over spherical shells.

use nalgebra::DVector;

/// Default number of Halton points per search.
pub const DEFAULT_SAMPLES: usize = 4096;

const PRIMES: [u32; 16] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53];

/// Radical inverse of `index` in `base`.
pub fn radical_inverse(mut index: u64, base: u32) -> f64 {
    let b = u64::from(base);
    let inv = 1.0 / f64::from(base);
    let mut f = inv;
    let mut r = 0.0;
    while index > 0 {
        r += f * (index % b) as f64;
        index /= b;
        f *= inv;
    }
    r
}

/// `count` points of the Halton sequence in `[0, 1)^dim`, skipping index 0.
pub fn halton(dim: usize, count: usize) -> Vec<Vec<f64>> {
    assert!(dim <= PRIMES.len(), "halton: dimension {dim} too large");
    (1..=count as u64)
        .map(|i| {
            PRIMES[..dim]
                .iter()
                .map(|&p| radical_inverse(i, p))
                .collect()
        })
        .collect()
}

/// Unit directions in `R^dim` from Halton points of the cube `[-1,1]^dim`
/// restricted to the unit ball (rejection keeps them uniform on the sphere).
pub fn directions(dim: usize, count: usize) -> Vec<DVector<f64>> {
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let p: Vec<f64> = PRIMES[..dim]
            .iter()
            .map(|&b| 2.0 * radical_inverse(i, b) - 1.0)
            .collect();
        i += 1;
        let v = DVector::from_vec(p);
        let nrm = v.norm();
        if nrm > 1e-3 && nrm <= 1.0 {
            out.push(v / nrm);
        }
        if dim == 1 && out.len() == 2 {
            break;
        }
    }
    out
}

fn compass<F>(
    mut best: DVector<f64>,
    mut fbest: f64,
    mut step: f64,
    project: impl Fn(&mut DVector<f64>),
    f: F,
    sign: f64,
) -> (DVector<f64>, f64)
where
    F: Fn(&DVector<f64>) -> f64,
{
    let n = best.len();
    let min_step = step * 1e-9;
    while step > min_step {
        let mut improved = false;
        for i in 0..n {
            for s in [1.0, -1.0] {
                let mut cand = best.clone();
                cand[i] += s * step;
                project(&mut cand);
                let fc = f(&cand);
                if sign * fc > sign * fbest {
                    best = cand;
                    fbest = fc;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    (best, fbest)
}

/// Approximate `sup_{|x| <= r} f(x)` from `samples` boundary directions,
/// `samples` interior points and a compass-search refinement.
pub fn sup_over_ball<F>(dim: usize, r: f64, samples: usize, f: F) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
{
    if r <= 0.0 {
        return f(&DVector::zeros(dim));
    }
    let mut best = DVector::zeros(dim);
    let mut fbest = f(&best);
    let mut consider = |x: DVector<f64>| {
        let fx = f(&x);
        if fx > fbest {
            fbest = fx;
            best = x;
        }
    };
    for d in directions(dim, samples) {
        consider(&d * r);
    }
    for p in halton(dim + 1, samples) {
        // Radius drawn as u^(1/dim) gives a uniform point in the ball.
        let d = direction_from_cube(&p[..dim]);
        let rad = r * p[dim].powf(1.0 / dim as f64);
        if let Some(d) = d {
            consider(d * rad);
        }
    }
    let project = |x: &mut DVector<f64>| {
        let nrm = x.norm();
        if nrm > r {
            *x *= r / nrm;
        }
    };
    compass(best, fbest, 0.05 * r, project, &f, 1.0).1
}

fn direction_from_cube(p: &[f64]) -> Option<DVector<f64>> {
    let v = DVector::from_iterator(p.len(), p.iter().map(|c| 2.0 * c - 1.0));
    let nrm = v.norm();
    (nrm > 1e-3).then(|| v / nrm)
}

/// Approximate `min_{lo <= |x| <= hi} f(x)` over a spherical shell.
pub fn min_over_shell<F>(dim: usize, lo: f64, hi: f64, samples: usize, f: F) -> f64
where
    F: Fn(&DVector<f64>) -> f64,
{
    assert!(0.0 <= lo && lo <= hi, "min_over_shell: need 0 <= lo <= hi");
    let mut best = DVector::zeros(dim);
    best[0] = lo;
    let mut fbest = f(&best);
    let dirs = directions(dim, samples);
    let pts = halton(1, samples);
    for (d, u) in dirs.iter().zip(&pts) {
        // Bias radii toward the inner sphere where positive definite
        // functions usually attain their shell minimum.
        for rad in [lo, lo + (hi - lo) * u[0] * u[0]] {
            let x = d * rad;
            let fx = f(&x);
            if fx < fbest {
                fbest = fx;
                best = x;
            }
        }
    }
    let project = |x: &mut DVector<f64>| {
        let nrm = x.norm();
        if nrm < lo {
            if nrm > 0.0 {
                *x *= lo / nrm;
            } else {
                x[0] = lo;
            }
        } else if nrm > hi {
            *x *= hi / nrm;
        }
    };
    let step = 0.05 * hi.max(1e-12);
    compass(best, fbest, step, project, &f, -1.0).1
}
