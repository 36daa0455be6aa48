//! Rank measurements of the three 4-webs and the combined 6-web.

use weblab_core::conics::ConfocalFamily;
use weblab_core::rank::{
    confocal_bipolar_transforms, rank_estimate, six_web_transforms, CollocationConfig, Transform,
};
use weblab_core::web::{SampleBox, Web};

fn fam() -> ConfocalFamily {
    ConfocalFamily::new(2.0, 1.0).unwrap()
}

fn rank_box() -> SampleBox {
    SampleBox::new(0.5, 2.2, 0.5, 1.6)
}

#[test]
fn bipolar_web_has_rank_three() {
    let web = Web::confocal_bipolar(fam(), rank_box(), 0.05);
    let cfg = CollocationConfig {
        degree: 12,
        samples: 800,
        gap_threshold: 1e3,
        seed: 42,
        transforms: confocal_bipolar_transforms(2.0, 1.0),
    };
    let rep = rank_estimate(&web, &cfg).unwrap();
    assert_eq!(
        rep.detected_rank,
        3,
        "spectrum tail {:?} / {:?}",
        &rep.singular_values[rep.singular_values.len().saturating_sub(6)..],
        &rep.singular_values_low[rep.singular_values_low.len().saturating_sub(6)..]
    );
}

#[test]
fn bipolar_three_subwebs_have_rank_one() {
    let web = Web::confocal_bipolar(fam(), rank_box(), 0.05);
    let transforms = confocal_bipolar_transforms(2.0, 1.0);
    for (k, sub) in web.subwebs(3).into_iter().enumerate() {
        // drop the transform of the omitted foliation (lexicographic
        // subsets: subweb k omits foliation 3 − k)
        let omitted = 3 - k;
        let sub_transforms: Vec<Transform> = transforms
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != omitted)
            .map(|(_, t)| *t)
            .collect();
        let cfg = CollocationConfig {
            degree: 12,
            samples: 700,
            gap_threshold: 1e3,
            seed: 42,
            transforms: sub_transforms,
        };
        let rep = rank_estimate(&sub, &cfg).unwrap();
        assert_eq!(
            rep.detected_rank,
            1,
            "subweb {k}: tail {:?} / {:?}",
            &rep.singular_values[rep.singular_values.len().saturating_sub(4)..],
            &rep.singular_values_low[rep.singular_values_low.len().saturating_sub(4)..]
        );
    }
}

#[test]
fn tangent_web_has_rank_three() {
    let web = Web::confocal_tangent(fam(), 0.0, SampleBox::new(0.3, 2.5, 0.3, 2.0), 0.05).unwrap();
    let cfg = CollocationConfig {
        degree: 8,
        samples: 700,
        gap_threshold: 1e3,
        seed: 42,
        transforms: Vec::new(),
    };
    let rep = rank_estimate(&web, &cfg).unwrap();
    assert_eq!(rep.detected_rank, 3);
}

#[test]
fn six_web_rank_is_below_the_bound() {
    let web = Web::six_web(fam(), rank_box(), 0.05);
    let cfg = CollocationConfig {
        degree: 8,
        samples: 900,
        gap_threshold: 1e3,
        seed: 42,
        transforms: six_web_transforms(2.0, 1.0),
    };
    let rep = rank_estimate(&web, &cfg).unwrap();
    assert!(
        rep.detected_rank < 10,
        "six-web rank {} should be short of the bound 10",
        rep.detected_rank
    );
    // the union contains the relations of both 4-webs
    assert!(
        rep.detected_rank >= 6,
        "six-web rank {} should include both 4-web relation spaces",
        rep.detected_rank
    );
}
