#![allow(dead_code)]

/// Exact `ε² E[τ ∧ n]` for the axis-pull game in the half-plane at `p = 2`.
///
/// With I pulling along `e₁`, II along `−e₁` and the noise orthogonal to the pull, `x₁` is
/// a simple random walk with step `ε`. Write `x₁ = (2 + k) ε`; turns with `k ≤ 0` are
/// boundary turns and end the game one step later. `k0` is the starting lattice index.
pub fn half_plane_axis_walk(eps: f64, k0: usize, n: u64) -> f64 {
    let size = k0 + n as usize + 2;
    let mut dist = vec![0.0f64; size];
    dist[k0] = 1.0;
    let mut expected = 0.0;
    for _ in 0..n {
        // Every live state, boundary or not, takes this turn.
        expected += dist.iter().sum::<f64>();
        let mut next = vec![0.0f64; size];
        for (k, &pr) in dist.iter().enumerate().skip(1) {
            if pr == 0.0 {
                continue;
            }
            next[k + 1] += 0.5 * pr;
            next[k - 1] += 0.5 * pr;
        }
        dist = next;
    }
    eps * eps * expected
}
