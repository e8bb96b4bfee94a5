mod common;


use common::corpus::{brute_force_groups, planted_corpus, reference_hash};
use pawfuse::data::{
    correlation_vector, eda_report, find_duplicates, kfold_split, perceptual_hash, HashAlgorithm, ImageInfo,
    MetadataRecord,
};
use pawfuse::vision::ImageTensor;
use pawfuse::SeededRng;
use rand::Rng;

fn random_image(rng: &mut SeededRng) -> ImageTensor {
    let h = rng.random_range(8..40);
    let w = rng.random_range(8..40);
    let bytes: Vec<u8> = (0..h * w * 3).map(|_| rng.random()).collect();
    ImageTensor::from_rgb8(h, w, &bytes).unwrap()
}

#[test]
fn hashes_agree_with_reference_hasher() {
    let mut rng = SeededRng::new(41);
    for _ in 0..50 {
        let img = random_image(&mut rng);
        for algo in [HashAlgorithm::Average, HashAlgorithm::Difference] {
            assert_eq!(perceptual_hash(&img, algo).bits, reference_hash(&img, algo), "{algo:?}");
        }
    }
}

#[test]
fn uniform_gray_vs_inverted() {
    let gray = ImageTensor::filled(24, 24, [0.3; 3]);
    let inverted = ImageTensor::filled(24, 24, [0.7; 3]);
    let reference = (reference_hash(&gray, HashAlgorithm::Average) ^ reference_hash(&inverted, HashAlgorithm::Average))
        .count_ones();
    let got = perceptual_hash(&gray, HashAlgorithm::Average).distance(&perceptual_hash(&inverted, HashAlgorithm::Average));
    assert_eq!(got, reference);
    assert_eq!(got, 0);
}

#[test]
fn identical_images_have_distance_zero() {
    let img = random_image(&mut SeededRng::new(2));
    let copy = ImageTensor::decode_fixture(&img.encode_fixture()).unwrap();
    for algo in [HashAlgorithm::Average, HashAlgorithm::Difference] {
        assert_eq!(perceptual_hash(&img, algo).distance(&perceptual_hash(&copy, algo)), 0);
    }
}

/// Over these 20 seeded images the largest distance observed is 4 bits;
/// the bound asserted is the documented 6.
#[test]
fn bilinear_upscale_stays_close() {
    let mut rng = SeededRng::new(77);
    let mut worst = 0;
    for _ in 0..20 {
        let img = random_image(&mut rng);
        let up = img.resize_bilinear(2 * img.height(), 2 * img.width());
        let d = perceptual_hash(&img, HashAlgorithm::Average).distance(&perceptual_hash(&up, HashAlgorithm::Average));
        worst = worst.max(d);
    }
    println!("worst upscale distance: {worst}");
    assert!(worst <= 6);
}

#[test]
fn planted_near_duplicates_found_exactly() {
    let corpus = planted_corpus(45, 0, 5, 4, 9);
    let items = corpus.hashed(HashAlgorithm::Average);
    for &(a, b, flips) in &corpus.near_pairs {
        assert_eq!(items[a].hash.distance(&items[b].hash), flips as u32);
    }
    let groups = find_duplicates(&items, 4).unwrap();
    let got: Vec<Vec<usize>> = groups.iter().map(|g| g.indices.clone()).collect();
    let mut planted: Vec<Vec<usize>> = corpus.near_pairs.iter().map(|&(a, b, _)| vec![a.min(b), a.max(b)]).collect();
    planted.sort();
    let bits: Vec<u64> = items.iter().map(|i| i.hash.bits).collect();
    assert_eq!(got, brute_force_groups(&bits, 4));
    assert_eq!(got, planted);
}

#[test]
fn grouping_matches_brute_force_on_200_images() {
    for seed in 0..3 {
        let corpus = planted_corpus(140, 30, 30, 10, seed);
        for algo in [HashAlgorithm::Average, HashAlgorithm::Difference] {
            let items = corpus.hashed(algo);
            let bits: Vec<u64> = items.iter().map(|i| i.hash.bits).collect();
            for threshold in [0, 4, 8] {
                let groups = find_duplicates(&items, threshold).unwrap();
                let got: Vec<Vec<usize>> = groups.iter().map(|g| g.indices.clone()).collect();
                assert_eq!(got, brute_force_groups(&bits, threshold), "seed {seed} {algo:?} t={threshold}");
                for g in &groups {
                    let labels: Vec<u8> = g.indices.iter().map(|&i| corpus.labels[i]).collect();
                    let spread = labels.iter().max().unwrap() - labels.iter().min().unwrap();
                    assert_eq!(g.label_spread, Some(spread));
                    let max_d = g
                        .indices
                        .iter()
                        .flat_map(|&i| g.indices.iter().map(move |&j| (i, j)))
                        .map(|(i, j)| items[i].hash.distance(&items[j].hash))
                        .max()
                        .unwrap();
                    assert_eq!(g.max_distance, max_d);
                }
            }
            let groups = find_duplicates(&items, 0).unwrap();
            for &(a, b) in &corpus.exact_pairs {
                assert!(groups.iter().any(|g| g.indices.contains(&a) && g.indices.contains(&b)));
            }
        }
    }
}

#[test]
fn kfold_on_corpus_scale() {
    let f = kfold_split(9912, 10, 2021).unwrap();
    assert!(f.fold_sizes().iter().all(|&s| s == 991 || s == 992));
    assert_eq!(f.fold_sizes().iter().sum::<usize>(), 9912);
    let mut seen = vec![false; 9912];
    for fold in 0..10 {
        for i in f.validation(fold) {
            assert!(!seen[i]);
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(f, kfold_split(9912, 10, 2021).unwrap());
}

#[test]
fn report_correlations_equal_correlation_vector() {
    let mut rng = SeededRng::new(4);
    let records: Vec<MetadataRecord> = (0..300)
        .map(|i| {
            let label: u8 = rng.random_range(0..=100);
            let mut f = [0u8; 12];
            f[0] = u8::from(label > 50);
            f[1] = u8::from(rng.random_bool(f64::from(label) / 100.0));
            for v in &mut f[2..11] {
                *v = rng.random_range(0..=1);
            }
            MetadataRecord::new(format!("r{i}"), f, Some(label))
        })
        .collect();
    let images: Vec<ImageInfo> = records
        .iter()
        .map(|r| ImageInfo::of(r.id.clone(), &ImageTensor::filled(10, 20, [0.5; 3]), HashAlgorithm::Average))
        .collect();
    let report = eda_report(&records, &images, None, 0).unwrap();
    assert_eq!(report.correlations, correlation_vector(&records).unwrap());
    assert!(report.correlations[0].r > report.correlations[1].r);
    assert!(report.correlations[1].r > 0.3);
    assert!(report.correlations[11].undefined);
    assert_eq!(report.pawpularity.total(), 300);
    assert_eq!(report.width.total(), 300);
    // Every image hashes identically, so the duplicate summary is one group.
    assert_eq!(report.duplicates.groups.len(), 1);
}
