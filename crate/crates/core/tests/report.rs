use bdm::bank::{DatasetCrops, Domain, PatchBank};
use bdm::manifest::{config_hash, Manifest, ManifestEntry, ManifestHeader};
use bdm::mix::{BankView, MixContext};
use bdm::pipeline::{mix_pairs, output_names};
use bdm::report::supervision_report;
use bdm::stats::{build_spatial_prior, ClassStats};
use bdm::synth::{block_dataset, long_tail_shares, BlockSpec};
use bdm::types::{MixConfig, Sample, SelectionMode};

fn run(source: &[Sample], target: &[Sample], config: &MixConfig, pairs: u64) -> Manifest {
    let k = config.num_classes;
    let grid = config
        .grid_for(source[0].width(), source[0].height())
        .unwrap();
    let ss = ClassStats::from_samples(source, k).unwrap();
    let ts = ClassStats::from_samples(target, k).unwrap();
    let bank_s = PatchBank::build(Domain::Source, source, grid, k, 3, &ss.difficulty).unwrap();
    let bank_t = PatchBank::build(Domain::Target, target, grid, k, 3, &ts.difficulty).unwrap();
    let (crops_s, crops_t) = (DatasetCrops::new(source), DatasetCrops::new(target));
    let labels: Vec<_> = source.iter().map(|s| s.label.clone()).collect();
    let prior = build_spatial_prior(&labels, k, config.bandwidth).unwrap();
    let balance = ss.class_balance(config.alpha).unwrap();
    let ctx = MixContext::new(
        BankView::new(&bank_s, &crops_s),
        BankView::new(&bank_t, &crops_t),
        &balance,
        &prior,
        config,
    )
    .unwrap();
    let mut entries = Vec::new();
    for p in mix_pairs(&ctx, source, target, config.seed, pairs, 0).unwrap() {
        for (m, partner) in [(&p.source, &p.target), (&p.target, &p.source)] {
            let (img, lab) = output_names(p.index, m);
            entries.push(ManifestEntry::from_mixed(
                p.index,
                p.pair_seed,
                &partner.sample_id,
                m,
                img,
                lab,
            ));
        }
    }
    Manifest {
        header: ManifestHeader {
            format: "bdm-manifest".into(),
            version: 1,
            config_hash: config_hash(config),
            config: config.clone(),
            pair_count: pairs,
            source_dir: String::new(),
            target_dir: String::new(),
            source_bank_sha256: String::new(),
            target_bank_sha256: String::new(),
        },
        entries,
    }
}

#[test]
fn uniform_class_toy_gives_even_supervision() {
    let spec = BlockSpec::new(32, 24, 4, vec![1.0; 3]).with_ignore(4, 12);
    let source = block_dataset("s", 40, &spec, 3).unwrap();
    let target = block_dataset("t", 40, &spec, 4).unwrap();
    let config = MixConfig {
        num_classes: 3,
        seed: 8,
        ..MixConfig::default()
    };
    let m = run(&source, &target, &config, 1500);
    let r = supervision_report(Some(&m), None, None).unwrap();
    assert!(r.relative_spread() <= 0.05, "{:?}", r.rows);
}

#[test]
fn rare_class_gains_share_under_joint_selection() {
    let spec = BlockSpec::new(32, 24, 2, long_tail_shares()).with_ignore(4, 12);
    let source = block_dataset("s", 60, &spec, 5).unwrap();
    let target = block_dataset("t", 60, &spec, 6).unwrap();
    let joint = MixConfig {
        num_classes: 3,
        seed: 2,
        ..MixConfig::default()
    };
    let uniform = MixConfig {
        selection: SelectionMode::UniformPatch,
        ..joint.clone()
    };
    let m = run(&source, &target, &joint, 300);
    let b = run(&source, &target, &uniform, 300);
    let r = supervision_report(Some(&m), Some(&b), None).unwrap();
    let rare = &r.rows[2];
    assert!(rare.share > rare.baseline_share.unwrap(), "{:?}", r.rows);
}
