use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Which channel-grouping rule applies for a given `(C, Z)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupCase {
    /// `Z == C`: one exclusive channel per group.
    Equal,
    /// `Z < C`: groups partition the input, the first `C mod Z` take one extra.
    Reduce,
    /// `Z > C`: singleton groups, each input channel shared by several groups.
    Expand,
}

impl GroupCase {
    pub fn number(self) -> u8 {
        match self {
            GroupCase::Equal => 1,
            GroupCase::Reduce => 2,
            GroupCase::Expand => 3,
        }
    }
}

/// Assignment of the `C` input channels to the `Z` stage-1 filters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupPlan {
    in_channels: usize,
    out_channels: usize,
    groups: Vec<Vec<usize>>,
}

impl GroupPlan {
    pub fn in_channels(&self) -> usize {
        self.in_channels
    }

    pub fn out_channels(&self) -> usize {
        self.out_channels
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn case(&self) -> GroupCase {
        use std::cmp::Ordering::*;
        match self.out_channels.cmp(&self.in_channels) {
            Equal => GroupCase::Equal,
            Less => GroupCase::Reduce,
            Greater => GroupCase::Expand,
        }
    }

    /// `r_i` for every group.
    pub fn group_sizes(&self) -> Vec<usize> {
        self.groups.iter().map(Vec::len).collect()
    }

    /// Σ r_i, which is always `max(C, Z)`.
    pub fn total_group_channels(&self) -> usize {
        self.groups.iter().map(Vec::len).sum()
    }

    /// How many groups read each input channel.
    pub fn share_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.in_channels];
        for &c in self.groups.iter().flatten() {
            counts[c] += 1;
        }
        counts
    }
}

impl fmt::Display for GroupPlan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let z = self.out_channels;
        match self.case() {
            GroupCase::Equal => write!(f, "case 1, {z} singleton groups"),
            GroupCase::Reduce => {
                let sizes = self.group_sizes();
                let big = sizes[0];
                let n_big = sizes.iter().filter(|&&s| s == big).count();
                if n_big == z {
                    write!(f, "case 2, {z} groups × {big} channels")
                } else {
                    write!(
                        f,
                        "case 2, {n_big} groups × {big} channels + {} groups × {} channels",
                        z - n_big,
                        big - 1
                    )
                }
            }
            GroupCase::Expand => {
                let shares = self.share_counts();
                let top = shares[0];
                let n_top = shares.iter().filter(|&&s| s == top).count();
                let c = self.in_channels;
                if n_top == c {
                    write!(f, "case 3, {z} singleton groups, each channel shared by {top}")
                } else {
                    write!(
                        f,
                        "case 3, {z} singleton groups, {n_top} channels shared by {top} + {} shared by {}",
                        c - n_top,
                        top - 1
                    )
                }
            }
        }
    }
}

/// Splits `C` input channels into `Z` stage-1 groups.
///
/// Channels are assigned contiguously: in the reducing case group `i` takes
/// the next `r_i` ascending channels, and in the expanding case the groups
/// sharing channel 0 come first, then those sharing channel 1, and so on.
pub fn plan_groups(in_channels: usize, out_channels: usize) -> Result<GroupPlan> {
    if in_channels == 0 || out_channels == 0 {
        return invalid(format!(
            "channel counts must be positive, got C={in_channels} Z={out_channels}"
        ));
    }
    let (c, z) = (in_channels, out_channels);
    let groups = if z <= c {
        let base = c / z;
        let rm = c % z;
        let mut next = 0;
        (0..z)
            .map(|i| {
                let len = if i < rm { base + 1 } else { base };
                let g: Vec<usize> = (next..next + len).collect();
                next += len;
                g
            })
            .collect()
    } else {
        let base = z / c;
        let rm = z % c;
        (0..c)
            .flat_map(|ch| {
                let shares = if ch < rm { base + 1 } else { base };
                std::iter::repeat_n(vec![ch], shares)
            })
            .collect()
    };
    Ok(GroupPlan {
        in_channels,
        out_channels,
        groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resnet50_reduction_is_64_groups_of_4() {
        let p = plan_groups(256, 64).unwrap();
        assert_eq!(p.case(), GroupCase::Reduce);
        assert_eq!(p.groups().len(), 64);
        for (i, g) in p.groups().iter().enumerate() {
            assert_eq!(g, &(4 * i..4 * i + 4).collect::<Vec<_>>());
        }
        assert_eq!(p.to_string(), "case 2, 64 groups × 4 channels");
    }

    #[test]
    fn equal_channels_are_singletons() {
        let p = plan_groups(8, 8).unwrap();
        assert_eq!(p.case(), GroupCase::Equal);
        let expect: Vec<Vec<usize>> = (0..8).map(|c| vec![c]).collect();
        assert_eq!(p.groups(), expect.as_slice());
        assert_eq!(p.to_string(), "case 1, 8 singleton groups");
    }

    #[test]
    fn reduce_with_remainder() {
        let p = plan_groups(10, 3).unwrap();
        assert_eq!(
            p.groups(),
            &[vec![0, 1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]
        );
        assert_eq!(
            p.to_string(),
            "case 2, 1 groups × 4 channels + 2 groups × 3 channels"
        );
    }

    #[test]
    fn expand_with_remainder() {
        let p = plan_groups(3, 10).unwrap();
        assert_eq!(p.case(), GroupCase::Expand);
        let owners: Vec<usize> = p.groups().iter().map(|g| g[0]).collect();
        assert_eq!(owners, vec![0, 0, 0, 0, 1, 1, 1, 2, 2, 2]);
        assert_eq!(p.share_counts(), vec![4, 3, 3]);
    }

    #[test]
    fn zero_channels_rejected() {
        assert!(plan_groups(0, 3).is_err());
        assert!(plan_groups(3, 0).is_err());
    }
}
