/// Differentiable stand-in for the rated/unrated indicator of a candidate
/// rating: `alpha` at or below zero, linear up to one, then one.
///
/// Exact at `r = 0` (weight `alpha`) and at every rating `r >= 1` (weight 1),
/// so true values remain a root of the systems that use it.
pub fn smooth_weight(alpha: f64, r: f64) -> f64 {
    if r <= 0.0 {
        alpha
    } else if r <= 1.0 {
        alpha + (1.0 - alpha) * r
    } else {
        1.0
    }
}

/// Derivative of [`smooth_weight`] in `r` (right derivative at the kinks).
pub fn smooth_weight_slope(alpha: f64, r: f64) -> f64 {
    if r > 0.0 && r <= 1.0 {
        1.0 - alpha
    } else {
        0.0
    }
}

/// Noise spreads within which an upload counts as consistent with "unrated".
pub const UNRATED_SPREAD_MULTIPLE: f64 = 2.0;

/// Decides between the two explanations of an all-item upload: unrated (true
/// value zero, `unrated_miss` from exact) or rated with value `rated`. The
/// rated miss is the distance to the nearest valid rating; unrated wins ties
/// and any miss within [`UNRATED_SPREAD_MULTIPLE`] noise spreads.
pub fn two_valued_rating(unrated_miss: f64, rated: f64, spread: f64, r_max: f64) -> f64 {
    let rated_miss = (rated - rated.round().clamp(1.0, r_max)).abs();
    if unrated_miss <= rated_miss.max(UNRATED_SPREAD_MULTIPLE * spread) {
        0.0
    } else {
        rated
    }
}

/// Keeps `|v| >= floor` so a vanishing denominator cannot produce infinities.
pub(crate) fn guard(v: f64, floor: f64) -> f64 {
    if v.abs() >= floor {
        v
    } else if v < 0.0 {
        -floor
    } else {
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_at_zero_and_integer_ratings() {
        assert_eq!(smooth_weight(0.1, 0.0), 0.1);
        for r in 1..=5 {
            assert_eq!(smooth_weight(0.1, r as f64), 1.0);
        }
        assert_eq!(smooth_weight(0.1, -2.0), 0.1);
        assert!((smooth_weight(0.1, 0.5) - 0.55).abs() < 1e-15);
        assert_eq!(smooth_weight_slope(0.1, 0.5), 0.9);
        assert_eq!(smooth_weight_slope(0.1, 2.0), 0.0);
    }

    #[test]
    fn two_valued_prefers_exact_explanation() {
        // Exactly unrated beats a non-integer rated reading.
        assert_eq!(two_valued_rating(0.0, 2.7, 0.0, 5.0), 0.0);
        // Exactly rated beats an inexact unrated reading.
        assert_eq!(two_valued_rating(0.4, 3.0, 0.0, 5.0), 3.0);
        // Within the noise spread unrated wins.
        assert_eq!(two_valued_rating(0.4, 3.0, 0.25, 5.0), 0.0);
    }

    #[test]
    fn guard_keeps_sign() {
        assert_eq!(guard(0.0, 1e-9), 1e-9);
        assert_eq!(guard(-1e-12, 1e-9), -1e-9);
        assert_eq!(guard(0.3, 1e-9), 0.3);
    }
}
