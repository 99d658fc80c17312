//! Box geometry, the GeoShape similarity measure with its analytic
//! gradient, baseline overlap metrics, and dual-calculation label
//! assignment.
//!
//! GeoShape scores a candidate box against a ground truth as
//! `psi = exp(-(d_c + gamma * d_r + beta * (1 - IoU)))` where `d_c` is the
//! size-normalized center distance and `d_r` the absolute log-aspect-ratio
//! difference. All three cues are invariant to joint scaling and
//! translation of both boxes.

use crate::error::{Error, Result};

/// Axis-aligned box in center form, pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Box {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl Box {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite() && w.is_finite() && h.is_finite()) {
            return Err(Error::NonFinite("box coordinates"));
        }
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "box extents must be positive, got w={} h={}",
                w, h
            )));
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn right(&self) -> f64 {
        self.cx + self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.cy + self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }
}

/// Weights of the aspect and overlap terms; the reference configuration is
/// `gamma = 2`, `beta = 1`.
#[derive(Debug, Clone, Copy)]
pub struct GeoShapeParams {
    pub gamma: f64,
    pub beta: f64,
}

impl Default for GeoShapeParams {
    fn default() -> Self {
        Self {
            gamma: 2.0,
            beta: 1.0,
        }
    }
}

impl GeoShapeParams {
    pub fn new(gamma: f64, beta: f64) -> Result<Self> {
        if gamma < 0.0 || beta < 0.0 || !gamma.is_finite() || !beta.is_finite() {
            return Err(Error::InvalidArgument(
                "gamma and beta must be finite and non-negative".into(),
            ));
        }
        Ok(Self { gamma, beta })
    }
}

fn intersection(a: &Box, g: &Box) -> f64 {
    let iw = a.right().min(g.right()) - a.left().max(g.left());
    let ih = a.bottom().min(g.bottom()) - a.top().max(g.top());
    if iw > 0.0 && ih > 0.0 {
        iw * ih
    } else {
        0.0
    }
}

/// Intersection over union, in `[0, 1]`.
pub fn iou(a: &Box, g: &Box) -> f64 {
    let inter = intersection(a, g);
    inter / (a.area() + g.area() - inter)
}

/// Generalized IoU, in `(-1, 1]`: IoU minus the fraction of the enclosing
/// box not covered by the union.
pub fn giou(a: &Box, g: &Box) -> f64 {
    let inter = intersection(a, g);
    let union = a.area() + g.area() - inter;
    let ew = a.right().max(g.right()) - a.left().min(g.left());
    let eh = a.bottom().max(g.bottom()) - a.top().min(g.top());
    let enclose = ew * eh;
    inter / union - (enclose - union) / enclose
}

/// Size-normalized center distance:
/// `sqrt((cx-cx')^2/(w+w')^2 + (cy-cy')^2/(h+h')^2)`.
pub fn center_distance(a: &Box, g: &Box) -> f64 {
    let dx = (a.cx - g.cx) / (a.w + g.w);
    let dy = (a.cy - g.cy) / (a.h + g.h);
    (dx * dx + dy * dy).sqrt()
}

/// Absolute difference of log aspect ratios.
pub fn ratio_distance(a: &Box, g: &Box) -> f64 {
    ((a.w / a.h).ln() - (g.w / g.h).ln()).abs()
}

/// GeoShape similarity in `(0, 1]`; equals 1 exactly when the boxes
/// coincide.
pub fn geoshape(a: &Box, g: &Box, params: &GeoShapeParams) -> f64 {
    let e = center_distance(a, g)
        + params.gamma * ratio_distance(a, g)
        + params.beta * (1.0 - iou(a, g));
    (-e).exp()
}

/// Analytic gradient of [`geoshape`] with respect to `a`'s
/// `(cx, cy, w, h)`.
///
/// The similarity is only piecewise smooth: coincident centers, equal
/// aspect ratios and boxes sharing an edge coordinate (including touching
/// edges) are kinks and rejected as non-smooth points rather than
/// subgradiented.
pub fn geoshape_grad(a: &Box, g: &Box, params: &GeoShapeParams) -> Result<[f64; 4]> {
    if a.cx == g.cx && a.cy == g.cy {
        return Err(Error::NonSmoothPoint("coincident centers"));
    }
    let log_ratio = (a.w / a.h).ln() - (g.w / g.h).ln();
    if params.gamma > 0.0 && log_ratio == 0.0 {
        return Err(Error::NonSmoothPoint("equal aspect ratios"));
    }
    for (p, q) in [
        (a.left(), g.left()),
        (a.left(), g.right()),
        (a.right(), g.left()),
        (a.right(), g.right()),
        (a.top(), g.top()),
        (a.top(), g.bottom()),
        (a.bottom(), g.top()),
        (a.bottom(), g.bottom()),
    ] {
        if p == q {
            return Err(Error::NonSmoothPoint("shared edge coordinate"));
        }
    }

    // center-distance term
    let sw = a.w + g.w;
    let sh = a.h + g.h;
    let dx = a.cx - g.cx;
    let dy = a.cy - g.cy;
    let dc = ((dx / sw).powi(2) + (dy / sh).powi(2)).sqrt();
    let dc_d = [
        dx / (sw * sw * dc),
        dy / (sh * sh * dc),
        -dx * dx / (sw * sw * sw * dc),
        -dy * dy / (sh * sh * sh * dc),
    ];

    // aspect-ratio term
    let sign = log_ratio.signum();
    let dr_d = [0.0, 0.0, sign / a.w, -sign / a.h];

    // IoU term; locally constant (zero) for disjoint boxes
    let iw = a.right().min(g.right()) - a.left().max(g.left());
    let ih = a.bottom().min(g.bottom()) - a.top().max(g.top());
    let mut iou_d = [0.0; 4];
    if iw > 0.0 && ih > 0.0 {
        let min_r = if a.right() < g.right() { 1.0 } else { 0.0 };
        let max_l = if a.left() > g.left() { 1.0 } else { 0.0 };
        let min_b = if a.bottom() < g.bottom() { 1.0 } else { 0.0 };
        let max_t = if a.top() > g.top() { 1.0 } else { 0.0 };
        // iw depends on cx and w, ih on cy and h
        let iw_d = [min_r - max_l, 0.0, 0.5 * (min_r + max_l), 0.0];
        let ih_d = [0.0, min_b - max_t, 0.0, 0.5 * (min_b + max_t)];
        let inter = iw * ih;
        let union = a.area() + g.area() - inter;
        let area_d = [0.0, 0.0, a.h, a.w];
        for k in 0..4 {
            let inter_d = iw_d[k] * ih + iw * ih_d[k];
            iou_d[k] = (inter_d * (union + inter) - inter * area_d[k]) / (union * union);
        }
    }

    let psi = geoshape(a, g, params);
    let mut grad = [0.0; 4];
    for k in 0..4 {
        grad[k] = psi * (-dc_d[k] - params.gamma * dr_d[k] + params.beta * iou_d[k]);
    }
    Ok(grad)
}

/// Dual-calculation score: the better of anchor-vs-GT and
/// prediction-vs-GT similarity.
pub fn dual_score(b: &Box, p: &Box, g: &Box, params: &GeoShapeParams) -> f64 {
    geoshape(b, g, params).max(geoshape(p, g, params))
}

/// One anchor's assignment: matched GT index (or background) and the dual
/// score that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnchorAssignment {
    /// Matched ground-truth index; `None` means background.
    pub label: Option<usize>,
    /// Best dual score over all GTs; 0 when there are no GTs.
    pub score: f64,
}

/// Per-anchor labels for a whole anchor set.
#[derive(Debug, Clone, PartialEq)]
pub struct AssignmentResult {
    pub anchors: Vec<AnchorAssignment>,
}

impl AssignmentResult {
    pub fn num_positive(&self) -> usize {
        self.anchors.iter().filter(|a| a.label.is_some()).count()
    }
}

/// Assigns each anchor to the GT maximizing its dual score, if that score
/// reaches `tau`; ties break to the lowest GT index. `anchors` and `preds`
/// are parallel lists.
pub fn assign_labels(
    anchors: &[Box],
    preds: &[Box],
    gts: &[Box],
    params: &GeoShapeParams,
    tau: f64,
) -> Result<AssignmentResult> {
    if anchors.len() != preds.len() {
        return Err(Error::LengthMismatch {
            anchors: anchors.len(),
            preds: preds.len(),
        });
    }
    let assignments = anchors
        .iter()
        .zip(preds)
        .map(|(b, p)| {
            let mut best: Option<(usize, f64)> = None;
            for (j, g) in gts.iter().enumerate() {
                let s = dual_score(b, p, g, params);
                // strict comparison keeps the lowest GT index on ties
                if best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((j, s));
                }
            }
            match best {
                Some((j, s)) if s >= tau => AnchorAssignment {
                    label: Some(j),
                    score: s,
                },
                Some((_, s)) => AnchorAssignment {
                    label: None,
                    score: s,
                },
                None => AnchorAssignment {
                    label: None,
                    score: 0.0,
                },
            }
        })
        .collect();
    Ok(AssignmentResult {
        anchors: assignments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand::Rng as _;
    use rand_chacha::ChaCha8Rng;

    fn b(cx: f64, cy: f64, w: f64, h: f64) -> Box {
        Box::new(cx, cy, w, h).unwrap()
    }

    fn random_box(rng: &mut ChaCha8Rng) -> Box {
        b(
            rng.gen_range(-10.0..10.0),
            rng.gen_range(-10.0..10.0),
            rng.gen_range(0.5..8.0),
            rng.gen_range(0.5..8.0),
        )
    }

    #[test]
    fn iou_giou_basics() {
        let x = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(iou(&x, &x), 1.0);
        assert_eq!(giou(&x, &x), 1.0);

        let far = b(100.0, 100.0, 2.0, 2.0);
        assert_eq!(iou(&x, &far), 0.0);
        assert!(giou(&x, &far) < 0.0);

        let shifted = b(1.0, 0.0, 2.0, 2.0);
        assert!((iou(&x, &shifted) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn center_distance_values() {
        let x = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(center_distance(&x, &x), 0.0);
        let shifted = b(1.0, 0.0, 2.0, 2.0);
        assert!((center_distance(&x, &shifted) - 0.25).abs() < 1e-15);

        // invariant under joint uniform scaling
        let s = 3.7;
        let xs = b(0.0, 0.0, 2.0 * s, 2.0 * s);
        let ss = b(s, 0.0, 2.0 * s, 2.0 * s);
        assert!((center_distance(&xs, &ss) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn ratio_distance_values() {
        let wide = b(0.0, 0.0, 2.0, 1.0);
        let tall = b(5.0, 5.0, 1.0, 2.0);
        assert_eq!(ratio_distance(&wide, &b(3.0, 3.0, 4.0, 2.0)), 0.0);
        assert!((ratio_distance(&wide, &tall) - 2.0 * 2.0_f64.ln()).abs() < 1e-12);
        assert_eq!(ratio_distance(&wide, &tall), ratio_distance(&tall, &wide));
    }

    #[test]
    fn geoshape_hand_case() {
        let params = GeoShapeParams::default();
        assert_eq!(params.gamma, 2.0);
        assert_eq!(params.beta, 1.0);

        let x = b(0.0, 0.0, 2.0, 2.0);
        assert_eq!(geoshape(&x, &x, &params), 1.0);

        let shifted = b(1.0, 0.0, 2.0, 2.0);
        let psi = geoshape(&x, &shifted, &params);
        assert!((psi - (-(11.0_f64 / 12.0)).exp()).abs() < 1e-12);
        assert!((psi - 0.39985).abs() < 1e-4);
    }

    proptest! {
        #[test]
        fn geoshape_range_and_similarity_invariance(seed in 0u64..300) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = GeoShapeParams::default();
            let a = random_box(&mut rng);
            let g = random_box(&mut rng);
            let psi = geoshape(&a, &g, &params);
            prop_assert!(psi > 0.0 && psi <= 1.0);

            let s = rng.gen_range(0.1..5.0);
            let tx = rng.gen_range(-20.0..20.0);
            let ty = rng.gen_range(-20.0..20.0);
            let xf = |bx: &Box| b(bx.cx * s + tx, bx.cy * s + ty, bx.w * s, bx.h * s);
            let psi2 = geoshape(&xf(&a), &xf(&g), &params);
            prop_assert!((psi - psi2).abs() < 1e-12);
        }
    }

    #[test]
    fn geoshape_monotone_in_center_offset() {
        let params = GeoShapeParams::default();
        let g = b(0.0, 0.0, 4.0, 4.0);
        let mut prev = f64::INFINITY;
        for i in 0..40 {
            let off = i as f64 * 0.25;
            let psi = geoshape(&b(off, 0.0, 4.0, 4.0), &g, &params);
            assert!(psi <= prev + 1e-15);
            prev = psi;
        }
    }

    fn fd_grad(a: &Box, g: &Box, params: &GeoShapeParams, step: f64) -> [f64; 4] {
        let eval = |cx: f64, cy: f64, w: f64, h: f64| geoshape(&b(cx, cy, w, h), g, params);
        [
            (eval(a.cx + step, a.cy, a.w, a.h) - eval(a.cx - step, a.cy, a.w, a.h)) / (2.0 * step),
            (eval(a.cx, a.cy + step, a.w, a.h) - eval(a.cx, a.cy - step, a.w, a.h)) / (2.0 * step),
            (eval(a.cx, a.cy, a.w + step, a.h) - eval(a.cx, a.cy, a.w - step, a.h)) / (2.0 * step),
            (eval(a.cx, a.cy, a.w, a.h + step) - eval(a.cx, a.cy, a.w, a.h - step)) / (2.0 * step),
        ]
    }

    /// Rejects samples whose finite-difference stencil could straddle a kink.
    fn near_kink(a: &Box, g: &Box, margin: f64) -> bool {
        if (a.cx - g.cx).abs() < margin && (a.cy - g.cy).abs() < margin {
            return true;
        }
        if ((a.w / a.h).ln() - (g.w / g.h).ln()).abs() < margin {
            return true;
        }
        let ax = [a.left(), a.right()];
        let gx = [g.left(), g.right()];
        let ay = [a.top(), a.bottom()];
        let gy = [g.top(), g.bottom()];
        for p in ax {
            for q in gx {
                if (p - q).abs() < margin {
                    return true;
                }
            }
        }
        for p in ay {
            for q in gy {
                if (p - q).abs() < margin {
                    return true;
                }
            }
        }
        false
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let params = GeoShapeParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let mut checked = 0;
        while checked < 1000 {
            let a = random_box(&mut rng);
            let g = random_box(&mut rng);
            if near_kink(&a, &g, 1e-3) {
                continue;
            }
            let grad = geoshape_grad(&a, &g, &params).unwrap();
            let fd = fd_grad(&a, &g, &params, 1e-5);
            for k in 0..4 {
                let scale = fd[k].abs().max(1e-3);
                assert!(
                    (grad[k] - fd[k]).abs() <= 1e-4 * scale,
                    "component {} analytic {} vs fd {} for a={:?} g={:?}",
                    k,
                    grad[k],
                    fd[k],
                    a,
                    g
                );
            }
            checked += 1;
        }
    }

    #[test]
    fn gradient_disjoint_boxes_drops_iou_term() {
        let params = GeoShapeParams::default();
        let a = b(0.0, 0.0, 2.0, 1.0);
        let g = b(10.0, 10.0, 3.0, 2.0);
        let grad = geoshape_grad(&a, &g, &params).unwrap();
        // IoU locally constant at 0, so the gradient equals the d_c/d_r part
        let no_iou = GeoShapeParams::new(params.gamma, 0.0).unwrap();
        let partial = geoshape_grad(&a, &g, &no_iou).unwrap();
        let ratio = geoshape(&a, &g, &params) / geoshape(&a, &g, &no_iou);
        for k in 0..4 {
            assert!((grad[k] - partial[k] * ratio).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_rejects_non_smooth_points() {
        let params = GeoShapeParams::default();
        let g = b(0.0, 0.0, 2.0, 2.0);
        // coincident centers
        assert!(matches!(
            geoshape_grad(&b(0.0, 0.0, 3.0, 1.0), &g, &params),
            Err(Error::NonSmoothPoint(_))
        ));
        // touching edges: a.right == g.left
        assert!(matches!(
            geoshape_grad(&b(-2.0, 0.5, 2.0, 1.0), &g, &params),
            Err(Error::NonSmoothPoint(_))
        ));
    }

    #[test]
    fn psi_peaks_at_ground_truth() {
        // approach a = g along a fixed generic direction: psi rises to 1 and
        // the analytic gradient stays bounded
        let params = GeoShapeParams::default();
        let g = b(1.0, 2.0, 3.0, 2.0);
        let dir = [0.31, -0.17, 0.23, 0.41];
        let mut prev_psi = 0.0;
        for i in (1..=8).rev() {
            let t = 0.1 * i as f64;
            let a = b(
                g.cx + t * dir[0],
                g.cy + t * dir[1],
                g.w + t * dir[2],
                g.h + t * dir[3],
            );
            let psi = geoshape(&a, &g, &params);
            assert!(psi > prev_psi);
            prev_psi = psi;
            let grad = geoshape_grad(&a, &g, &params).unwrap();
            assert!(grad.iter().all(|v| v.is_finite() && v.abs() < 10.0));
        }
        assert!(prev_psi > 0.9);
    }

    #[test]
    fn dual_score_cases() {
        let params = GeoShapeParams::default();
        let g = b(0.0, 0.0, 2.0, 2.0);
        let near = b(0.5, 0.0, 2.0, 2.0);
        let far = b(3.0, 1.0, 1.0, 1.0);

        let s = dual_score(&far, &near, &g, &params);
        assert_eq!(
            s,
            geoshape(&far, &g, &params).max(geoshape(&near, &g, &params))
        );
        // p == g forces a perfect score regardless of the anchor
        assert_eq!(dual_score(&far, &g, &g, &params), 1.0);
        // b == p degenerates to a single evaluation
        assert_eq!(dual_score(&far, &far, &g, &params), geoshape(&far, &g, &params));
    }

    /// Exhaustive enumeration oracle for label assignment.
    fn assign_oracle(
        anchors: &[Box],
        preds: &[Box],
        gts: &[Box],
        params: &GeoShapeParams,
        tau: f64,
    ) -> Vec<AnchorAssignment> {
        anchors
            .iter()
            .zip(preds)
            .map(|(bx, px)| {
                let scores: Vec<f64> = gts
                    .iter()
                    .map(|g| {
                        geoshape(bx, g, params).max(geoshape(px, g, params))
                    })
                    .collect();
                let mut best_j = None;
                let mut best_s = f64::NEG_INFINITY;
                for (j, &s) in scores.iter().enumerate() {
                    if s > best_s {
                        best_s = s;
                        best_j = Some(j);
                    }
                }
                match best_j {
                    Some(j) if best_s >= tau => AnchorAssignment {
                        label: Some(j),
                        score: best_s,
                    },
                    Some(_) => AnchorAssignment {
                        label: None,
                        score: best_s,
                    },
                    None => AnchorAssignment {
                        label: None,
                        score: 0.0,
                    },
                }
            })
            .collect()
    }

    #[test]
    fn assignment_trivial_cases() {
        let params = GeoShapeParams::default();
        let anchors = vec![b(0.0, 0.0, 2.0, 2.0), b(5.0, 5.0, 1.0, 1.0)];
        let res = assign_labels(&anchors, &anchors, &[], &params, 0.5).unwrap();
        assert!(res.anchors.iter().all(|a| a.label.is_none()));

        let gt = b(0.0, 0.0, 2.0, 2.0);
        let res = assign_labels(&anchors[..1], &anchors[..1], &[gt], &params, 0.5).unwrap();
        assert_eq!(res.anchors[0].label, Some(0));
        assert_eq!(res.anchors[0].score, 1.0);

        assert!(assign_labels(&anchors, &anchors[..1], &[gt], &params, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn assignment_matches_brute_force(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let params = GeoShapeParams::default();
            let n = rng.gen_range(1..=16usize);
            let m = rng.gen_range(0..=4usize);
            let anchors: Vec<Box> = (0..n).map(|_| random_box(&mut rng)).collect();
            let preds: Vec<Box> = (0..n).map(|_| random_box(&mut rng)).collect();
            let gts: Vec<Box> = (0..m).map(|_| random_box(&mut rng)).collect();
            let res = assign_labels(&anchors, &preds, &gts, &params, 0.5).unwrap();
            let oracle = assign_oracle(&anchors, &preds, &gts, &params, 0.5);
            prop_assert_eq!(res.anchors, oracle);
        }
    }
}
