//! Labeled in-memory datasets, task subsets, and the stratified split.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::ImageU8;
use crate::rng::{tags, Rng};

/// The eight wafer classes with stable integer codes 0..7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WaferClass {
    Good = 0,
    LowLevel = 1,
    Circle = 2,
    Crack = 3,
    Displaced = 4,
    WaferOnPin = 5,
    Splinter = 6,
    Scratch = 7,
}

impl WaferClass {
    pub const ALL: [WaferClass; 8] = [
        WaferClass::Good,
        WaferClass::LowLevel,
        WaferClass::Circle,
        WaferClass::Crack,
        WaferClass::Displaced,
        WaferClass::WaferOnPin,
        WaferClass::Splinter,
        WaferClass::Scratch,
    ];

    pub fn code(&self) -> usize {
        *self as usize
    }

    pub fn name(&self) -> &'static str {
        match self {
            WaferClass::Good => "good",
            WaferClass::LowLevel => "lowlevel",
            WaferClass::Circle => "circle",
            WaferClass::Crack => "crack",
            WaferClass::Displaced => "displaced",
            WaferClass::WaferOnPin => "waferonpin",
            WaferClass::Splinter => "splinter",
            WaferClass::Scratch => "scratch",
        }
    }

    /// Case-insensitive parse by class name.
    pub fn parse(s: &str) -> Result<WaferClass> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == lower)
            .ok_or_else(|| Error::Parse(format!("unknown class label '{s}'")))
    }

    /// The classes of the 3/5/8-class tasks, in code order.
    pub fn task_classes(task: usize) -> Result<&'static [WaferClass]> {
        match task {
            3 => Ok(&Self::ALL[..3]),
            5 => Ok(&Self::ALL[..5]),
            8 => Ok(&Self::ALL[..]),
            _ => Err(Error::Config(format!("task must be 3, 5 or 8 classes, got {task}"))),
        }
    }

    /// Reference per-class counts of the full dataset.
    pub fn reference_count(&self) -> usize {
        match self {
            WaferClass::Good => 1096,
            WaferClass::LowLevel => 420,
            WaferClass::Circle => 351,
            WaferClass::Crack => 577,
            WaferClass::Displaced => 993,
            WaferClass::WaferOnPin => 256,
            WaferClass::Splinter => 79,
            WaferClass::Scratch => 569,
        }
    }
}

/// One labeled image. `id` is a stable identity (the manifest filename
/// for loaded data, a synthetic tag for generated samples).
#[derive(Debug, Clone)]
pub struct Sample {
    pub id: String,
    pub image: ImageU8,
    /// Dense index into the owning dataset's class list.
    pub label: usize,
}

/// Ordered samples over a dense class list.
#[derive(Debug, Clone, Default)]
pub struct Dataset {
    pub classes: Vec<String>,
    pub samples: Vec<Sample>,
}

impl Dataset {
    /// An empty dataset over all eight wafer classes.
    pub fn empty_full() -> Self {
        Dataset {
            classes: WaferClass::ALL.iter().map(|c| c.name().to_string()).collect(),
            samples: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Per-class sample counts, indexed by dense label.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = alloc::vec![0usize; self.classes.len()];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    pub fn label_of(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }

    /// Sorted sample ids (split-identity fingerprint).
    pub fn id_set(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.samples.iter().map(|s| s.id.clone()).collect();
        ids.sort_unstable();
        ids
    }

    /// Validates that every label indexes the class list.
    pub fn check(&self) -> Result<()> {
        for s in &self.samples {
            if s.label >= self.classes.len() {
                return Err(Error::Parse(format!(
                    "sample '{}' has label {} outside 0..{}",
                    s.id,
                    s.label,
                    self.classes.len()
                )));
            }
        }
        Ok(())
    }
}

/// Keeps exactly the classes of the 3/5/8-class task, re-indexing labels
/// densely and preserving class order.
pub fn class_subset(ds: &Dataset, task: usize) -> Result<Dataset> {
    let keep = WaferClass::task_classes(task)?;
    let mut mapping: Vec<Option<usize>> = alloc::vec![None; ds.classes.len()];
    let mut classes = Vec::with_capacity(keep.len());
    for (new_idx, class) in keep.iter().enumerate() {
        let old = ds
            .label_of(class.name())
            .ok_or_else(|| Error::Config(format!("dataset lacks class '{}'", class.name())))?;
        mapping[old] = Some(new_idx);
        classes.push(class.name().to_string());
    }
    let samples = ds
        .samples
        .iter()
        .filter_map(|s| {
            mapping[s.label].map(|new_label| Sample {
                id: s.id.clone(),
                image: s.image.clone(),
                label: new_label,
            })
        })
        .collect();
    Ok(Dataset { classes, samples })
}

/// Deterministic stratified split. Each class is shuffled by the seed,
/// `floor(ratio * n)` samples go to each part, remainders go to train.
pub fn stratified_split(
    ds: Dataset,
    ratios: (f64, f64, f64),
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let (rt, rv, rs) = ratios;
    if rt <= 0.0 || rv <= 0.0 || rs <= 0.0 {
        return Err(Error::Config("split ratios must be positive".into()));
    }
    if ((rt + rv + rs) - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!(
            "split ratios must sum to 1, got {}",
            rt + rv + rs
        )));
    }

    let mut by_class: Vec<Vec<usize>> = alloc::vec![Vec::new(); ds.classes.len()];
    for (i, s) in ds.samples.iter().enumerate() {
        by_class[s.label].push(i);
    }
    // part of each sample: 0 train, 1 val, 2 test
    let mut assignment = alloc::vec![0u8; ds.samples.len()];
    for (label, indices) in by_class.iter_mut().enumerate() {
        let n = indices.len();
        if n == 0 {
            continue;
        }
        if n < 3 {
            return Err(Error::Split {
                class: ds.classes[label].clone(),
                have: n,
                parts: 3,
            });
        }
        let mut rng = Rng::stream(seed, tags::SPLIT, label as u64, 0);
        rng.shuffle(indices);
        let (n_train, n_val, _n_test) = allocate(n, rt, rv, rs);
        for (pos, &idx) in indices.iter().enumerate() {
            assignment[idx] = if pos < n_train {
                0
            } else if pos < n_train + n_val {
                1
            } else {
                2
            };
        }
    }

    let mut parts = [
        Dataset { classes: ds.classes.clone(), samples: Vec::new() },
        Dataset { classes: ds.classes.clone(), samples: Vec::new() },
        Dataset { classes: ds.classes, samples: Vec::new() },
    ];
    for (s, &part) in ds.samples.into_iter().zip(&assignment) {
        parts[part as usize].samples.push(s);
    }
    let [train, val, test] = parts;
    Ok((train, val, test))
}

/// Largest-remainder allocation of `n` samples to three ratio parts.
/// Each part starts at `floor(ratio * n)`; leftover samples go to the
/// parts with the largest fractional shortfall, train winning ties. This
/// keeps every part within one sample of its exact share.
fn allocate(n: usize, rt: f64, rv: f64, rs: f64) -> (usize, usize, usize) {
    let exact = [rt * n as f64, rv * n as f64, rs * n as f64];
    let mut counts = [exact[0] as usize, exact[1] as usize, exact[2] as usize];
    let mut leftover = n - counts.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    // stable by construction: equal fractions resolve to train, val, test
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &i in &order {
        if leftover == 0 {
            break;
        }
        counts[i] += 1;
        leftover -= 1;
    }
    (counts[0], counts[1], counts[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(h: usize) -> ImageU8 {
        ImageU8::filled(h, h, 100)
    }

    fn make_ds(counts: &[usize]) -> Dataset {
        let mut ds = Dataset::empty_full();
        for (label, &n) in counts.iter().enumerate() {
            for i in 0..n {
                ds.samples.push(Sample {
                    id: format!("{}_{i}", ds.classes[label]),
                    image: tiny(8),
                    label,
                });
            }
        }
        ds
    }

    #[test]
    fn class_codes_are_stable() {
        assert_eq!(WaferClass::Good.code(), 0);
        assert_eq!(WaferClass::Scratch.code(), 7);
        assert_eq!(WaferClass::parse("WaferOnPin").unwrap(), WaferClass::WaferOnPin);
        assert_eq!(WaferClass::parse("GOOD").unwrap(), WaferClass::Good);
        assert!(WaferClass::parse("bogus").is_err());
    }

    #[test]
    fn split_10_goes_6_2_2() {
        let ds = make_ds(&[10, 0, 0, 0, 0, 0, 0, 0]);
        let (tr, va, te) = stratified_split(ds, (0.6, 0.2, 0.2), 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6, 2, 2));
    }

    #[test]
    fn split_1096_remainder_goes_to_train() {
        let ds = make_ds(&[1096, 0, 0, 0, 0, 0, 0, 0]);
        let (tr, va, te) = stratified_split(ds, (0.6, 0.2, 0.2), 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (658, 219, 219));
    }

    #[test]
    fn split_stays_within_one_sample_of_exact_share() {
        for n in [4usize, 9, 14, 79, 569, 1096] {
            let (a, b, c) = allocate(n, 0.6, 0.2, 0.2);
            assert_eq!(a + b + c, n);
            for (count, ratio) in [(a, 0.6), (b, 0.2), (c, 0.2)] {
                let dev = (count as f64 - ratio * n as f64).abs();
                assert!(dev <= 1.0, "n={n}: count {count} vs {}", ratio * n as f64);
            }
        }
    }

    #[test]
    fn split_is_deterministic_and_partitions() {
        let ds = make_ds(&[20, 13, 9, 0, 0, 0, 0, 0]);
        let total = ds.len();
        let (a1, b1, c1) = stratified_split(ds.clone(), (0.6, 0.2, 0.2), 42).unwrap();
        let (a2, b2, c2) = stratified_split(ds, (0.6, 0.2, 0.2), 42).unwrap();
        assert_eq!(a1.id_set(), a2.id_set());
        assert_eq!(b1.id_set(), b2.id_set());
        assert_eq!(c1.id_set(), c2.id_set());
        assert_eq!(a1.len() + b1.len() + c1.len(), total);
        let mut all = a1.id_set();
        all.extend(b1.id_set());
        all.extend(c1.id_set());
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), total, "parts must be disjoint");
    }

    #[test]
    fn split_rejects_tiny_class() {
        let ds = make_ds(&[10, 2, 0, 0, 0, 0, 0, 0]);
        let err = stratified_split(ds, (0.6, 0.2, 0.2), 1).unwrap_err();
        assert_eq!(err, Error::Split { class: "lowlevel".into(), have: 2, parts: 3 });
    }

    #[test]
    fn split_rejects_bad_ratios() {
        let ds = make_ds(&[10, 0, 0, 0, 0, 0, 0, 0]);
        assert!(stratified_split(ds.clone(), (0.6, 0.2, 0.1), 1).is_err());
        assert!(stratified_split(ds, (0.8, 0.2, 0.0), 1).is_err());
    }

    #[test]
    fn subset_keeps_checkmarked_classes() {
        let counts = [4usize, 5, 6, 7, 8, 9, 10, 11];
        let ds = make_ds(&counts);
        let t3 = class_subset(&ds, 3).unwrap();
        assert_eq!(t3.classes, ["good", "lowlevel", "circle"]);
        assert_eq!(t3.len(), 4 + 5 + 6);
        let t5 = class_subset(&ds, 5).unwrap();
        assert_eq!(t5.len(), 4 + 5 + 6 + 7 + 8);
        assert!(t5.label_of("waferonpin").is_none());
        let t8 = class_subset(&ds, 8).unwrap();
        assert_eq!(t8.len(), ds.len());
        assert_eq!(t8.class_counts(), counts.to_vec());
    }

    #[test]
    fn subset_relabels_densely() {
        let ds = make_ds(&[3, 3, 3, 3, 3, 0, 0, 0]);
        let t5 = class_subset(&ds, 5).unwrap();
        for s in &t5.samples {
            assert!(s.label < 5);
        }
        assert_eq!(t5.class_counts(), alloc::vec![3, 3, 3, 3, 3]);
    }
}
