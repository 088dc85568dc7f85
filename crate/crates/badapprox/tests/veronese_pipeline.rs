use badapprox::algebraic::{badr_to_bk, bn_margin};
use badapprox::cantor::{
    build_r_sequence, extract_point, interior_samples, intersect_sequences, survivor_is_safe, ConstructionParams,
    ExtractMode, RSequence,
};
use badapprox::certify::dual_margin;
use badapprox::dangerous::PolyCurve;
use badapprox::exact::{rat, AlgebraicScalar, RatInterval, WeightVector};
use num_traits::{Signed, ToPrimitive};

fn params(weights: &str, q_max: u32) -> ConstructionParams {
    let i0 = RatInterval::new(rat(1, 2), rat(1, 1)).unwrap();
    ConstructionParams {
        big_r: 8,
        m: 2,
        q_max,
        weights: WeightVector::parse(weights).unwrap(),
        curve: PolyCurve::veronese(2, i0.clone()),
        i0,
        budget: 50_000_000,
        threads: 1,
    }
}

#[test]
fn extracted_point_is_certified_and_feeds_polynomial_badness() {
    let p = params("1/2,1/2", 6);
    let s = build_r_sequence(&p).unwrap();
    s.check_complete().unwrap();
    assert!(s.levels.iter().all(|l| l.count() > 0));

    let enc = extract_point(&s, ExtractMode::Midmost).unwrap();
    let y = p.curve.eval(&enc.mid());
    let h_max = p.b().pow(&rat(p.t_max() as i64, 1)).unwrap().floor().to_u64().unwrap();
    assert_eq!(h_max, 256);
    let cert = dual_margin(&y, &p.weights, h_max).unwrap();
    assert!(cert.recheck());
    let floor = p.kappa().div(&p.b());
    assert!(cert.margin >= floor, "margin {} below {}", cert.margin, floor);

    let claim = badr_to_bk(&cert, 2).unwrap();
    assert!(claim.consistent);
    assert!(claim.cross_check.as_ref().unwrap().margin.is_positive());

    let linear = dual_margin(&y, &WeightVector::parse("1,0").unwrap(), h_max).unwrap();
    let claim1 = badr_to_bk(&linear, 1).unwrap();
    assert!(claim1.consistent);
    assert_eq!(bn_margin(&y[0], 1, claim1.valid_height).unwrap(), claim1.cross_check.unwrap());
}

#[test]
fn survivors_are_safe_at_random_points() {
    let p = params("1/2,1/2", 5);
    let s = build_r_sequence(&p).unwrap();
    let q = s.depth();
    let level = s.level(q).unwrap();
    let step = (level.runs.len() / 10).max(1);
    for (k, &(a, _)) in level.runs.iter().step_by(step).enumerate() {
        let xs = interior_samples(&s.cell(q, a), 5, k as u64);
        assert!(survivor_is_safe(&p, q, &xs).unwrap());
    }
}

#[test]
fn intersection_is_certified_for_both_weights() {
    let pa = params("1/2,1/2", 5);
    let pb = params("2/3,1/3", 5);
    let s = intersect_sequences(&[build_r_sequence(&pa).unwrap(), build_r_sequence(&pb).unwrap()]).unwrap();
    assert!(s.levels.iter().all(|l| l.count() > 0));
    let enc = extract_point(&s, ExtractMode::Leftmost).unwrap();
    let y = pa.curve.eval(&enc.mid());
    for p in [&pa, &pb] {
        let h_max = p.b().pow(&rat(p.t_max() as i64, 1)).unwrap().floor().to_u64().unwrap();
        let cert = dual_margin(&y, &p.weights, h_max).unwrap();
        assert!(cert.margin >= p.kappa().div(&p.b()));
    }
}

#[test]
fn sequence_round_trips_through_json() {
    let s = build_r_sequence(&params("1/2,1/2", 4)).unwrap();
    let json = serde_json::to_string(&s).unwrap();
    let back: RSequence = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
    let _: AlgebraicScalar = back.params[0].kappa();
}
