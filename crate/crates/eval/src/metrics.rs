use wigest_core::GestureLabel;

pub const N_CLASSES: usize = GestureLabel::COUNT;

/// Classification outcome on one test set.
#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    pub accuracy: f64,
    /// `confusion[truth][prediction]`
    pub confusion: [[u64; N_CLASSES]; N_CLASSES],
    /// NaN for classes absent from the test set.
    pub per_class_accuracy: [f64; N_CLASSES],
}

impl Metrics {
    /// Panics if a label or prediction is not a class id or the lengths differ.
    pub fn from_predictions(truth: &[usize], predicted: &[usize]) -> Self {
        assert_eq!(truth.len(), predicted.len(), "one prediction per sample");
        let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        Self::from_confusion(confusion)
    }

    pub fn from_confusion(confusion: [[u64; N_CLASSES]; N_CLASSES]) -> Self {
        let total: u64 = confusion.iter().flatten().sum();
        let trace: u64 = (0..N_CLASSES).map(|i| confusion[i][i]).sum();
        let mut per_class_accuracy = [f64::NAN; N_CLASSES];
        for (i, row) in confusion.iter().enumerate() {
            let n: u64 = row.iter().sum();
            if n > 0 {
                per_class_accuracy[i] = row[i] as f64 / n as f64;
            }
        }
        Metrics {
            accuracy: if total == 0 {
                f64::NAN
            } else {
                trace as f64 / total as f64
            },
            confusion,
            per_class_accuracy,
        }
    }

    pub fn total(&self) -> u64 {
        self.confusion.iter().flatten().sum()
    }

    /// Element-wise sum of confusion matrices.
    pub fn pooled<'a>(all: impl IntoIterator<Item = &'a Metrics>) -> Metrics {
        let mut confusion = [[0u64; N_CLASSES]; N_CLASSES];
        for m in all {
            for (dst, src) in confusion.iter_mut().flatten().zip(m.confusion.iter().flatten()) {
                *dst += src;
            }
        }
        Self::from_confusion(confusion)
    }
}

pub fn argmax(row: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}
