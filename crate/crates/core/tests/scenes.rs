use rand::Rng;
use virtfusion_core::assetio::{read_scene_ply, write_scene_ply, LabelMap};
use virtfusion_core::composer::{compose, generate_batch, validate_scene, ComposerConfig, SceneTemplate, Violation};
use virtfusion_core::geometry::LabeledCloud;
use virtfusion_core::objectpool::{assign_class, class_stats, normalize_size, ObjectAsset, SizeTable, DEFAULT_JITTER};
use virtfusion_core::rng::seeded;

fn pool(n_points: usize) -> Vec<ObjectAsset> {
    let labels = LabelMap::scannet20();
    let table = SizeTable::from_label_map(&labels, DEFAULT_JITTER).unwrap();
    let classes = [3u32, 4, 5, 6, 7, 8];
    let mut rng = seeded(99);
    classes
        .iter()
        .enumerate()
        .map(|(i, &class)| {
            let (w, d) = (rng.random_range(0.3..1.2), rng.random_range(0.3..1.2));
            let pts = (0..n_points)
                .map(|_| [rng.random_range(0.0..w), rng.random_range(0.0..d), rng.random_range(0.0..1.0)])
                .collect();
            let cloud = LabeledCloud::from_points(pts, [i as u8 * 30, 100, 200]).unwrap();
            let asset = assign_class(&cloud, class, &labels).unwrap().with_id(format!("obj{i}"));
            normalize_size(&asset, &table, &mut rng).unwrap()
        })
        .collect()
}

#[test]
fn batch_is_valid_and_reproducible() {
    let pool = pool(3000);
    let template = SceneTemplate::default();
    let cfg = ComposerConfig {
        tau: 20_000,
        seed: 11,
        ..ComposerConfig::for_template(&template)
    };
    let a = generate_batch(&pool, &template, &cfg, 24).unwrap();
    let b = generate_batch(&pool, &template, &cfg, 24).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.scene, y.scene);
        let report = validate_scene(&x.scene, &cfg, cfg.margin);
        assert!(report.is_ok(), "{}: {:?}", x.scene.meta.scene_id, report.violations);
        assert_eq!(x.scene.cloud.len(), x.raw_points.min(cfg.tau));
    }
    assert_eq!(a[3].scene.meta.scene_id, "scene_00003");
    assert_ne!(a[0].scene, a[1].scene);
}

#[test]
fn downsampling_boundary() {
    let pool = pool(1000);
    let template = SceneTemplate::default();
    let base = ComposerConfig::for_template(&template);
    let raw = compose(&pool, &template, &base, &mut seeded(4)).unwrap().raw_points;
    for tau in [raw - 1, raw, raw + 1, raw / 3] {
        let cfg = ComposerConfig { tau, ..base.clone() };
        let c = compose(&pool, &template, &cfg, &mut seeded(4)).unwrap();
        assert_eq!(c.raw_points, raw);
        assert_eq!(c.scene.cloud.len(), raw.min(tau), "tau {tau}");
    }
}

#[test]
fn composed_scene_survives_ply_round_trip() {
    let pool = pool(2000);
    let template = SceneTemplate::default();
    let cfg = ComposerConfig {
        floor: true,
        ..ComposerConfig::for_template(&template)
    };
    let c = compose(&pool, &template, &cfg, &mut seeded(5)).unwrap();
    let bytes = write_scene_ply(&c.scene).unwrap();
    let back = read_scene_ply(&bytes).unwrap();
    assert_eq!(back, c.scene);
    assert_eq!(write_scene_ply(&back).unwrap(), bytes);
    assert_eq!(back.meta.background_class, cfg.floor_class);
    assert!(validate_scene(&back, &cfg, cfg.margin).is_ok());
}

#[test]
fn validator_catches_tampering() {
    let pool = pool(1000);
    let template = SceneTemplate::default();
    let cfg = ComposerConfig::for_template(&template);
    let c = compose(&pool, &template, &cfg, &mut seeded(6)).unwrap();

    let mut relabeled = c.scene.clone();
    relabeled.cloud.sem_mut()[0] ^= 1;
    let v = validate_scene(&relabeled, &cfg, cfg.margin).violations;
    assert!(v.iter().any(|v| matches!(v, Violation::LabelMismatch { .. })));

    let mut gap = c.scene.clone();
    let last = *gap.meta.instance_classes.keys().last().unwrap();
    let class = gap.meta.instance_classes.remove(&last).unwrap();
    gap.meta.instance_classes.insert(last + 5, class);
    let v = validate_scene(&gap, &cfg, cfg.margin).violations;
    assert!(v.iter().any(|v| matches!(v, Violation::NonContiguousIds { .. })));
    assert!(v.iter().any(|v| matches!(v, Violation::UnmappedInstance { .. })));

    let tight = ComposerConfig { tau: 10, ..cfg.clone() };
    let v = validate_scene(&c.scene, &tight, cfg.margin).violations;
    assert!(v.iter().any(|v| matches!(v, Violation::TooManyPoints { .. })));

    // a margin far above the configured one flags neighbours as touching
    let v = validate_scene(&c.scene, &cfg, 1.0).violations;
    assert!(v.iter().any(|v| matches!(v, Violation::Overlap { .. })));
}

#[test]
fn stats_over_a_batch_sum_to_one() {
    let pool = pool(1000);
    let template = SceneTemplate::default();
    let cfg = ComposerConfig::for_template(&template);
    let scenes: Vec<_> = generate_batch(&pool, &template, &cfg, 5)
        .unwrap()
        .into_iter()
        .map(|c| c.scene)
        .collect();
    let stats = class_stats(&scenes);
    let total: u64 = stats.classes.iter().map(|c| c.point_count).sum();
    assert_eq!(total, stats.total_points);
    assert_eq!(total as usize, scenes.iter().map(|s| s.cloud.len()).sum::<usize>());
    let frac: f64 = stats.classes.iter().map(|c| c.fraction).sum();
    assert!((frac - 1.0).abs() < 1e-12);
}
