//! Fully-connected multi-user network planning.
//!
//! Every pair of users shares one dedicated wavelength-channel pair, so a
//! fully connected network of `k` users consumes `k(k-1)/2` channel pairs.
//! Leftover pairs are reported, never redistributed: the plan stays free of
//! probabilistic multiplexing.

use thiserror::Error;

use crate::spectral::ChannelPair;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("{users} users need {needed} channel pairs, only {available} available")]
    InsufficientPairs { users: u32, needed: u64, available: u64 },
    #[error("a network needs at least 2 users, got {0}")]
    TooFewUsers(u32),
}

/// One entanglement link of the plan.
#[derive(Debug, Clone, Copy)]
pub struct Link {
    pub user_i: u32,
    pub user_j: u32,
    pub pair: ChannelPair,
    pub rate_bps: f64,
}

/// A complete fully-connected assignment.
#[derive(Debug, Clone)]
pub struct NetworkPlan {
    pub users: u32,
    pub links: Vec<Link>,
    pub leftover_pairs: u64,
}

impl NetworkPlan {
    pub fn total_rate_bps(&self) -> f64 {
        self.links.iter().map(|l| l.rate_bps).sum()
    }

    pub fn min_link_rate_bps(&self) -> f64 {
        self.links.iter().map(|l| l.rate_bps).fold(f64::INFINITY, f64::min)
    }
}

/// Largest `k` with `k(k-1)/2 <= n`: the most users a fully connected
/// network can host on `n` channel pairs.
pub fn max_fully_connected_users(n: u64) -> u64 {
    let mut k = ((1.0 + (1.0 + 8.0 * n as f64).sqrt()) / 2.0).floor() as u64;
    while k > 0 && k * (k - 1) / 2 > n {
        k -= 1;
    }
    while (k + 1) * k / 2 <= n {
        k += 1;
    }
    k
}

/// User range servable point-to-point: `n` channel pairs connect between
/// 2 and `2n` individual users.
pub fn point_to_point_users(n: u64) -> (u64, u64) {
    (2, 2 * n)
}

/// Assigns the `k(k-1)/2` highest-rate channel pairs to the user pairs in
/// lexicographic order. Any bijection yields the same rate multiset, so the
/// minimum link rate is already maximal; the fixed ordering makes plans
/// reproducible.
pub fn assign_channels(users: u32, rated_pairs: &[(ChannelPair, f64)]) -> Result<NetworkPlan, NetworkError> {
    if users < 2 {
        return Err(NetworkError::TooFewUsers(users));
    }
    let needed = users as u64 * (users as u64 - 1) / 2;
    let available = rated_pairs.len() as u64;
    if needed > available {
        return Err(NetworkError::InsufficientPairs { users, needed, available });
    }

    let mut order: Vec<usize> = (0..rated_pairs.len()).collect();
    order.sort_by(|&x, &y| {
        rated_pairs[y].1.total_cmp(&rated_pairs[x].1).then(rated_pairs[x].0.index.cmp(&rated_pairs[y].0.index))
    });

    let mut links = Vec::with_capacity(needed as usize);
    let mut next = order.into_iter();
    for i in 0..users {
        for j in (i + 1)..users {
            let idx = next.next().expect("enough pairs checked above");
            let (pair, rate_bps) = rated_pairs[idx];
            links.push(Link { user_i: i, user_j: j, pair, rate_bps });
        }
    }
    Ok(NetworkPlan { users, links, leftover_pairs: available - needed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::WdmGrid;

    fn pairs_with_rates(rates: &[f64]) -> Vec<(ChannelPair, f64)> {
        let grid = WdmGrid::new(193.4e12, 100e9, rates.len() as u32, 0.75).unwrap();
        grid.pairs().into_iter().zip(rates.iter().copied()).collect()
    }

    #[test]
    fn user_counts_match_channel_budgets() {
        assert_eq!(max_fully_connected_users(66), 12);
        assert_eq!(max_fully_connected_users(529), 33);
        assert_eq!(max_fully_connected_users(1), 2);
        // 33 users consume 528 pairs, one stays idle
        assert_eq!(33u64 * 32 / 2, 528);
    }

    #[test]
    fn triangular_numbers_invert_exactly() {
        for k in 2..=100u64 {
            assert_eq!(max_fully_connected_users(k * (k - 1) / 2), k);
        }
    }

    #[test]
    fn adding_pairs_never_shrinks_the_network() {
        let mut prev = 0;
        for n in 1..2000u64 {
            let k = max_fully_connected_users(n);
            assert!(k >= prev);
            prev = k;
        }
    }

    #[test]
    fn point_to_point_range() {
        assert_eq!(point_to_point_users(1), (2, 2));
        assert_eq!(point_to_point_users(66), (2, 132));
        assert_eq!(point_to_point_users(529), (2, 1058));
    }

    #[test]
    fn two_users_take_the_single_pair() {
        let rated = pairs_with_rates(&[7.5e6]);
        let plan = assign_channels(2, &rated).unwrap();
        assert_eq!(plan.links.len(), 1);
        assert_eq!(plan.links[0].pair.index, 1);
        assert_eq!(plan.leftover_pairs, 0);
    }

    #[test]
    fn equal_rates_give_equal_links() {
        let rated = pairs_with_rates(&[3.0e6; 66]);
        let plan = assign_channels(12, &rated).unwrap();
        assert_eq!(plan.links.len(), 66);
        assert_eq!(plan.leftover_pairs, 0);
        assert!(plan.links.iter().all(|l| l.rate_bps == 3.0e6));
        // every unordered user pair appears exactly once
        let mut seen = std::collections::BTreeSet::new();
        for l in &plan.links {
            assert!(l.user_i < l.user_j);
            assert!(seen.insert((l.user_i, l.user_j)));
        }
    }

    #[test]
    fn top_rates_are_kept_and_min_is_maximal() {
        let rated = pairs_with_rates(&[5.0, 4.0, 3.0, 2.0]);
        let plan = assign_channels(3, &rated).unwrap();
        assert_eq!(plan.links.len(), 3);
        assert_eq!(plan.leftover_pairs, 1);
        let mut rates: Vec<f64> = plan.links.iter().map(|l| l.rate_bps).collect();
        rates.sort_by(f64::total_cmp);
        assert_eq!(rates, vec![3.0, 4.0, 5.0]);
        assert_eq!(plan.min_link_rate_bps(), 3.0);
        assert_eq!(plan.total_rate_bps(), 12.0);
    }

    #[test]
    fn no_channel_pair_is_reused() {
        let rates: Vec<f64> = (0..100).map(|i| (i % 7) as f64 + 1.0).collect();
        let rated = pairs_with_rates(&rates);
        let plan = assign_channels(13, &rated).unwrap();
        let mut used = std::collections::BTreeSet::new();
        for l in &plan.links {
            assert!(used.insert(l.pair.index));
        }
        // total equals the sum of the 78 best rates
        let mut sorted = rates.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let best: f64 = sorted[..78].iter().sum();
        assert!((plan.total_rate_bps() - best).abs() < 1e-9);
    }

    #[test]
    fn adding_a_pair_never_lowers_the_plan_rate() {
        let mut rates: Vec<f64> = (0..10).map(|i| 10.0 - i as f64).collect();
        let base = assign_channels(4, &pairs_with_rates(&rates)).unwrap();
        rates.push(20.0);
        let more = assign_channels(4, &pairs_with_rates(&rates)).unwrap();
        assert!(more.total_rate_bps() >= base.total_rate_bps());
        assert!(more.min_link_rate_bps() >= base.min_link_rate_bps());
    }

    #[test]
    fn insufficient_pairs_is_an_error() {
        let rated = pairs_with_rates(&[1.0, 2.0, 3.0]);
        assert!(matches!(
            assign_channels(4, &rated),
            Err(NetworkError::InsufficientPairs { users: 4, needed: 6, available: 3 })
        ));
        assert!(matches!(assign_channels(1, &rated), Err(NetworkError::TooFewUsers(1))));
    }
}
