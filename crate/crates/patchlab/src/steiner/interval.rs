//! Continuous Steiner symmetrization of finite unions of intervals.

use crate::geometry::IntervalSet;

/// Moving interval: midpoint and half-length.
#[derive(Debug, Clone, Copy)]
struct Piece {
    mid: f64,
    half: f64,
}

impl Piece {
    /// Velocity of the midpoint: unit speed towards the origin, frozen there.
    fn velocity(&self) -> f64 {
        -self.mid.signum() * f64::from(u8::from(self.mid != 0.0))
    }
}

/// `M^τ[U]`: every interval's midpoint moves towards `0` with unit speed
/// and stops there; intervals that touch merge into one (whose midpoint
/// then moves on).  Event-driven: advance to the earliest midpoint arrival
/// or contact, update, repeat until `τ`.  Lengths are only ever added, so
/// the total length is preserved exactly for dyadic input.
pub fn msym_1d(u: &IntervalSet, tau: f64) -> IntervalSet {
    let mut ps: Vec<Piece> = u.intervals().iter().map(|&(a, b)| Piece { mid: 0.5 * (a + b), half: 0.5 * (b - a) }).collect();
    let tau = tau.max(0.0);
    let mut t = 0.0;
    loop {
        merge_touching(&mut ps);
        let mut dt = tau - t;
        let mut event = false;
        for p in &ps {
            if p.mid != 0.0 && p.mid.abs() <= dt {
                dt = p.mid.abs();
                event = true;
            }
        }
        for w in ps.windows(2) {
            let closing = w[0].velocity() - w[1].velocity();
            if closing > 0.0 {
                let gap = (w[1].mid - w[1].half) - (w[0].mid + w[0].half);
                let s = gap.max(0.0) / closing;
                if s <= dt {
                    dt = s;
                    event = true;
                }
            }
        }
        for p in &mut ps {
            let v = p.velocity();
            let m = p.mid + v * dt;
            // Arrival (or overshoot by roundoff) freezes the midpoint at 0.
            p.mid = if m * p.mid <= 0.0 || m.abs() <= 4.0 * f64::EPSILON * dt { 0.0 } else { m };
        }
        t += dt;
        if !event || t >= tau {
            merge_touching(&mut ps);
            break;
        }
    }
    IntervalSet::from_unsorted(ps.iter().map(|p| (p.mid - p.half, p.mid + p.half)).collect())
}

/// Merges neighbours whose closures meet (up to roundoff of the positions).
fn merge_touching(ps: &mut Vec<Piece>) {
    let mut k = 0;
    while k + 1 < ps.len() {
        let (l, r) = (ps[k], ps[k + 1]);
        let (a, b) = (l.mid - l.half, r.mid + r.half);
        let gap = (r.mid - r.half) - (l.mid + l.half);
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if gap <= 8.0 * f64::EPSILON * scale {
            ps[k] = Piece { mid: 0.5 * (a + b), half: l.half + r.half };
            ps.remove(k + 1);
            k = k.saturating_sub(1);
        } else {
            k += 1;
        }
    }
}

/// `sup_{x ∈ M^τ[U] △ U} dist(x, ∂U) − τ`: non-positive whenever the
/// symmetric difference stays within `τ` of the boundary of `U`.
pub fn containment_excess_1d(u: &IntervalSet, v: &IntervalSet, tau: f64) -> f64 {
    let ends: Vec<f64> = u.endpoints().collect();
    if ends.is_empty() {
        return if v.is_empty() { f64::NEG_INFINITY } else { f64::INFINITY };
    }
    let dist = |x: f64| ends.iter().map(|e| (x - e).abs()).fold(f64::INFINITY, f64::min);
    let mut cuts: Vec<f64> = u.endpoints().chain(v.endpoints()).collect();
    cuts.sort_by(f64::total_cmp);
    let mut worst = f64::NEG_INFINITY;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        let m = 0.5 * (a + b);
        if b <= a || u.contains(m) == v.contains(m) {
            continue;
        }
        // dist(·, ∂U) is piecewise linear; its maximum on [a, b] sits at an
        // end or at a midpoint between consecutive boundary points.
        let mut cand = vec![a, b];
        cand.extend(ends.windows(2).map(|e| 0.5 * (e[0] + e[1])).filter(|&c| c > a && c < b));
        worst = cand.into_iter().map(dist).fold(worst, f64::max);
    }
    worst - tau
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(ivs: &[(f64, f64)]) -> IntervalSet {
        IntervalSet::new(ivs.to_vec()).unwrap()
    }

    #[test]
    fn single_interval_moves_then_freezes() {
        assert_eq!(msym_1d(&set(&[(1.0, 3.0)]), 1.0).intervals(), &[(0.0, 2.0)]);
        assert_eq!(msym_1d(&set(&[(1.0, 3.0)]), 2.0).intervals(), &[(-1.0, 1.0)]);
        assert_eq!(msym_1d(&set(&[(1.0, 3.0)]), 7.5).intervals(), &[(-1.0, 1.0)]);
    }

    #[test]
    fn symmetric_pair_merges_at_the_origin() {
        let u = set(&[(-2.0, -1.0), (1.0, 2.0)]);
        assert_eq!(msym_1d(&u, 1.0).intervals(), &[(-1.0, 1.0)]);
        assert_eq!(msym_1d(&u, 1.5).intervals(), &[(-1.0, 1.0)]);
        assert_eq!(msym_1d(&u, 0.5).intervals(), &[(-1.5, -0.5), (0.5, 1.5)]);
    }

    #[test]
    fn independent_transport_before_any_event() {
        let v = msym_1d(&set(&[(-3.0, -1.0), (0.5, 1.5)]), 0.25);
        assert_eq!(v.intervals(), &[(-2.75, -0.75), (0.25, 1.25)]);
    }

    #[test]
    fn merged_interval_keeps_moving() {
        // (0.5,1.5) arrives at 0 at τ = 1 as (−0.5, 0.5); (2,3) reaches it at
        // τ = 1.5 (gap 0.5 closing at unit speed): merged (0,2), midpoint 1,
        // frozen at τ = 2.5.
        let u = set(&[(0.5, 1.5), (2.0, 3.0)]);
        assert_eq!(msym_1d(&u, 1.5).intervals(), &[(-0.5, 1.5)]);
        assert_eq!(msym_1d(&u, 2.0).intervals(), &[(-1.0, 1.0)]);
        assert_eq!(msym_1d(&u, 10.0).intervals(), &[(-1.0, 1.0)]);
    }

    #[test]
    fn containment_of_the_moved_set() {
        let u = set(&[(-3.0, -1.0), (0.5, 1.5)]);
        for tau in [0.1, 0.25, 0.8, 2.0] {
            assert!(containment_excess_1d(&u, &msym_1d(&u, tau), tau) <= 1e-12);
        }
    }
}
