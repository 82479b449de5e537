use super::{shuffled_order, TraceDataset, TraceError};

/// How datasets are assigned to the validation and testing splits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionPolicy {
    /// The first `l_valid` datasets in declared order validate.
    Ordered,
    /// Permute deterministically with the seed, then split as `Ordered`.
    SeededShuffle(u64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceCollection {
    pub datasets: Vec<TraceDataset>,
    pub validation: Vec<usize>,
    pub testing: Vec<usize>,
}

impl TraceCollection {
    pub fn validation_sets(&self) -> Vec<&TraceDataset> {
        self.validation.iter().map(|&i| &self.datasets[i]).collect()
    }

    pub fn testing_sets(&self) -> Vec<&TraceDataset> {
        self.testing.iter().map(|&i| &self.datasets[i]).collect()
    }
}

pub fn partition_collection(
    datasets: Vec<TraceDataset>,
    l_valid: usize,
    policy: PartitionPolicy,
) -> Result<TraceCollection, TraceError> {
    let total = datasets.len();
    if l_valid >= total {
        return Err(TraceError::BadPartition { l_valid, total });
    }
    let order = match policy {
        PartitionPolicy::Ordered => (0..total).collect(),
        PartitionPolicy::SeededShuffle(seed) => shuffled_order(total, seed),
    };
    let (validation, testing) = order.split_at(l_valid);
    Ok(TraceCollection {
        datasets,
        validation: validation.to_vec(),
        testing: testing.to_vec(),
    })
}
