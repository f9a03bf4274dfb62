//! Random grouping of parameter indices into disjoint subproblems.

use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of `0..dim` into ordered, disjoint, nonempty groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingPlan {
    pub dim: usize,
    pub groups: Vec<Vec<usize>>,
    pub generation: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    Overlap { index: usize, groups: Vec<usize> },
    Gap { index: usize },
    EmptyGroup { group: usize },
    OutOfRange { index: usize, group: usize },
    Unbalanced { smallest: usize, largest: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Overlap { index, groups } => {
                write!(f, "index {index} appears in groups {groups:?}")
            }
            Violation::Gap { index } => write!(f, "index {index} is not covered by any group"),
            Violation::EmptyGroup { group } => write!(f, "group {group} is empty"),
            Violation::OutOfRange { index, group } => {
                write!(f, "group {group} holds out-of-range index {index}")
            }
            Violation::Unbalanced { smallest, largest } => {
                write!(f, "group sizes range from {smallest} to {largest}")
            }
        }
    }
}

/// Uniform draw from the candidate group counts.
pub fn draw_group_count<R: Rng + ?Sized>(candidates: &[usize], rng: &mut R) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Config("grouping candidate set is empty".into()));
    }
    if candidates.contains(&0) {
        return Err(Error::Config("group count 0 is not a valid candidate".into()));
    }
    Ok(candidates[rng.gen_range(0..candidates.len())])
}

/// Shuffles `0..dim` and cuts the permutation into `m` contiguous chunks whose
/// sizes differ by at most one (larger chunks first).
pub fn random_grouping<R: Rng + ?Sized>(
    dim: usize,
    m: usize,
    generation: u64,
    rng: &mut R,
) -> Result<GroupingPlan> {
    if m < 1 || m > dim {
        return Err(Error::InvalidInput(format!(
            "cannot split {dim} parameters into {m} groups"
        )));
    }
    let mut perm: Vec<usize> = (0..dim).collect();
    perm.shuffle(rng);
    let base = dim / m;
    let extra = dim % m;
    let mut groups = Vec::with_capacity(m);
    let mut start = 0;
    for j in 0..m {
        let len = base + usize::from(j < extra);
        groups.push(perm[start..start + len].to_vec());
        start += len;
    }
    Ok(GroupingPlan {
        dim,
        groups,
        generation,
    })
}

impl GroupingPlan {
    /// A single group holding every index in order.
    pub fn whole(dim: usize, generation: u64) -> Self {
        Self {
            dim,
            groups: vec![(0..dim).collect()],
            generation,
        }
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Checks every plan invariant and reports all violations found.
    pub fn validate(&self) -> Result<(), Vec<Violation>> {
        let mut violations = Vec::new();
        let mut owners: Vec<Vec<usize>> = vec![Vec::new(); self.dim];
        for (g, group) in self.groups.iter().enumerate() {
            if group.is_empty() {
                violations.push(Violation::EmptyGroup { group: g });
            }
            for &index in group {
                match owners.get_mut(index) {
                    Some(o) => o.push(g),
                    None => violations.push(Violation::OutOfRange { index, group: g }),
                }
            }
        }
        for (index, o) in owners.into_iter().enumerate() {
            match o.len() {
                0 => violations.push(Violation::Gap { index }),
                1 => {}
                _ => violations.push(Violation::Overlap { index, groups: o }),
            }
        }
        let sizes = self.group_sizes();
        if let (Some(&smallest), Some(&largest)) = (sizes.iter().min(), sizes.iter().max()) {
            if largest - smallest > 1 {
                violations.push(Violation::Unbalanced { smallest, largest });
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(violations)
        }
    }
}
