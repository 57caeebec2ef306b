use crate::channel::achievable_rate;

const MAX_BISECTIONS: usize = 200;
const REL_TOL: f64 = 1e-9;

/// Residual-power water-filling on top of the minimum powers.
///
/// Returns `dp_k = [mu - b_k / a_k]^+` with the water level `mu` chosen by
/// bisection so that `sum dp_k` uses the residual `p_rem`, unless the rates
/// `R_k(b_k, p_min_k + dp_k)` would then exceed `c_fronthaul`; in that case a
/// second bisection lowers `mu` until the sum rate meets the cap. Both
/// searches keep the feasible end of the bracket, so the returned powers never
/// overshoot either budget. Users without bandwidth receive nothing.
pub fn waterfill_residual(b: &[f64], a: &[f64], p_min: &[f64], p_rem: f64, c_fronthaul: f64) -> Vec<f64> {
    let k = b.len();
    assert!(a.len() == k && p_min.len() == k, "length mismatch");
    let mut out = vec![0.0; k];
    if !(p_rem > 0.0) {
        return out;
    }
    let floors: Vec<Option<f64>> = b
        .iter()
        .zip(a)
        .map(|(&b, &a)| (b > 0.0).then(|| b / a))
        .collect();
    let Some(lowest) = floors.iter().flatten().copied().reduce(f64::min) else {
        return out;
    };

    let fill = |mu: f64, out: &mut [f64]| {
        for (o, f) in out.iter_mut().zip(&floors) {
            *o = match f {
                Some(f) => (mu - f).max(0.0),
                None => 0.0,
            };
        }
    };
    let spent = |mu: f64| -> f64 { floors.iter().flatten().map(|f| (mu - f).max(0.0)).sum() };
    let sum_rate = |mu: f64| -> f64 {
        (0..k)
            .map(|i| match floors[i] {
                Some(f) => achievable_rate(b[i], p_min[i] + (mu - f).max(0.0), a[i]),
                None => 0.0,
            })
            .sum()
    };

    // Power-limited level: spent(lo) <= p_rem < spent(hi).
    let mut lo = lowest;
    let mut hi = lowest + p_rem;
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        if spent(mid) <= p_rem {
            lo = mid;
        } else {
            hi = mid;
        }
        if p_rem - spent(lo) <= REL_TOL * p_rem || hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    let mut mu = lo;

    if sum_rate(mu) > c_fronthaul {
        if sum_rate(lowest) > c_fronthaul {
            return out;
        }
        // Rate-limited level: sum_rate(lo) <= C_f < sum_rate(hi).
        let mut lo = lowest;
        let mut hi = mu;
        for _ in 0..MAX_BISECTIONS {
            let mid = 0.5 * (lo + hi);
            if sum_rate(mid) <= c_fronthaul {
                lo = mid;
            } else {
                hi = mid;
            }
            if c_fronthaul - sum_rate(lo) <= REL_TOL * c_fronthaul || hi - lo <= f64::EPSILON * hi {
                break;
            }
        }
        mu = lo;
    }
    fill(mu, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn symmetric_users_split_evenly() {
        let dp = waterfill_residual(&[1e6, 1e6], &[1e9, 1e9], &[0.0, 0.0], 2.0, 1e12);
        assert_relative_eq!(dp[0], 1.0, max_relative = 1e-8);
        assert_relative_eq!(dp[1], 1.0, max_relative = 1e-8);
        assert!(dp[0] + dp[1] <= 2.0);
    }

    #[test]
    fn nothing_to_spend() {
        assert_eq!(waterfill_residual(&[1e6, 2e6], &[1e9, 1e8], &[0.1, 0.2], 0.0, 1e9), vec![0.0, 0.0]);
    }

    #[test]
    fn weak_user_below_water_gets_nothing() {
        // floors: 1e-3 and 1.0; with 0.5 W of water only user 0 is wet.
        let dp = waterfill_residual(&[1e6, 1e6], &[1e9, 1e6], &[0.0, 0.0], 0.5, 1e12);
        assert_relative_eq!(dp[0], 0.5, max_relative = 1e-8);
        assert_eq!(dp[1], 0.0);
    }

    #[test]
    fn fronthaul_cap_lowers_the_level() {
        let b = [1e6, 1e6];
        let a = [1e9, 1e9];
        let p_min = [0.0, 0.0];
        let free: f64 = waterfill_residual(&b, &a, &p_min, 2.0, 1e12)
            .iter()
            .zip(&b)
            .zip(&a)
            .map(|((&p, &b), &a)| achievable_rate(b, p, a))
            .sum();
        let cap = 0.5 * free;
        let dp = waterfill_residual(&b, &a, &p_min, 2.0, cap);
        let capped: f64 = dp.iter().zip(&b).zip(&a).map(|((&p, &b), &a)| achievable_rate(b, p, a)).sum();
        assert!(capped <= cap);
        assert_relative_eq!(capped, cap, max_relative = 1e-8);
        assert!(dp.iter().sum::<f64>() < 2.0);
    }

    #[test]
    fn zero_bandwidth_user_is_skipped() {
        let dp = waterfill_residual(&[0.0, 1e6], &[1e9, 1e9], &[0.0, 0.0], 1.0, 1e12);
        assert_eq!(dp[0], 0.0);
        assert_relative_eq!(dp[1], 1.0, max_relative = 1e-8);
    }
}
