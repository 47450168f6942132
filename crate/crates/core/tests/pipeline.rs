use mcfse::conceal::{conceal_block, conceal_sequence, Algorithm, Alignment, ConcealConfig};
use mcfse::harness::SynthSpec;
use mcfse::loss::{apply_loss, build_isolated_pattern, IsolatedPattern, LossBlock, LossMask};
use mcfse::{psnr_lost_pixels, Sequence};

fn synth(spec: &str) -> Sequence {
    spec.parse::<SynthSpec>().unwrap().generate()
}

fn small_fse(algorithm: Algorithm) -> ConcealConfig {
    let mut c = ConcealConfig::default().with_algorithm(algorithm);
    c.fse.max_iterations = 30;
    c
}

#[test]
fn every_algorithm_conceals_a_cif_sized_pattern() {
    let seq = synth("translate:dx=3,dy=1,width=176,height=144,frames=5");
    let pattern = IsolatedPattern {
        frames: vec![2],
        ..IsolatedPattern::default()
    };
    let mask = build_isolated_pattern(176, 144, 5, &pattern).unwrap();
    assert_eq!(mask.blocks().len(), 6);
    let corrupted = apply_loss(&seq, &mask).unwrap();
    for alg in Algorithm::ALL {
        let run = conceal_sequence(&corrupted, &mask, &small_fse(alg)).unwrap();
        assert_eq!(run.failures().count(), 0, "{alg}");
        assert_eq!(run.blocks.len(), 6);
        let p = psnr_lost_pixels(&seq, &run.sequence, &mask).unwrap();
        assert!(p.is_infinite() || p.db() > 15.0, "{alg}: {p}");
        // received pixels are never touched
        for t in 0..seq.frame_count() {
            for y in 0..144 {
                for x in 0..176 {
                    if mask.is_available(x, y, t) {
                        assert_eq!(run.sequence.sample(x, y, t), seq.sample(x, y, t));
                    }
                }
            }
        }
    }
}

#[test]
fn neighbouring_blocks_use_concealed_pixels() {
    // two adjacent lost blocks: the second sees the first as received
    let seq = synth("static:width=96,height=96,frames=3");
    let a = LossBlock::new(1, 32, 32, 16);
    let b = LossBlock::new(1, 48, 32, 16);
    let mask = LossMask::from_blocks(96, 96, 3, [b, a]).unwrap();
    let corrupted = apply_loss(&seq, &mask).unwrap();
    let run = conceal_sequence(&corrupted, &mask, &small_fse(Algorithm::Dmve)).unwrap();
    assert_eq!(run.blocks[0].block, a);
    assert_eq!(run.blocks[1].block, b);
    assert!(psnr_lost_pixels(&seq, &run.sequence, &mask)
        .unwrap()
        .is_infinite());
}

#[test]
fn scene_cut_disables_alignment() {
    let seq = synth("scenecut:cut=3,width=96,height=96,frames=5");
    let block = LossBlock::new(2, 40, 40, 16);
    let mask = LossMask::from_blocks(96, 96, 5, [block]).unwrap();
    let corrupted = apply_loss(&seq, &mask).unwrap();
    let out = conceal_block(&corrupted, &mask, &block, &small_fse(Algorithm::Mcfse)).unwrap();
    match out.alignment {
        Some(Alignment::Rejected(_, verdict)) => assert!(!verdict.reliable()),
        other => panic!("{other:?}"),
    }
    let plain = conceal_block(&corrupted, &mask, &block, &small_fse(Algorithm::Fse3d)).unwrap();
    assert_eq!(out.patch, plain.patch);
}

#[test]
fn losses_at_sequence_edges_shrink_the_volume() {
    let seq = synth("translate:dx=2,width=96,height=96,frames=3");
    let first = LossBlock::new(0, 40, 40, 16);
    let last = LossBlock::new(2, 40, 40, 16);
    let mask = LossMask::from_blocks(96, 96, 3, [first, last]).unwrap();
    let corrupted = apply_loss(&seq, &mask).unwrap();
    for alg in [Algorithm::Fse3d, Algorithm::Mcfse] {
        let run = conceal_sequence(&corrupted, &mask, &small_fse(alg)).unwrap();
        assert_eq!(run.failures().count(), 0);
        assert!(psnr_lost_pixels(&seq, &run.sequence, &mask).unwrap().db() > 25.0);
    }
    // temporal baselines have nothing to copy from for frame 0 and record it
    let run = conceal_sequence(&corrupted, &mask, &small_fse(Algorithm::Tr)).unwrap();
    assert_eq!(run.failures().count(), 1);
}
