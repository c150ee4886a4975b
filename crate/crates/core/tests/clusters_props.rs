use langcov::clusters::{aggregate_all, ClusterError};
use langcov::{aggregate_cluster, assign_clusters, Aggregation, ClusterMap, MetricsRow, Share};
use proptest::prelude::*;

fn row(language: &str, country: &str, ras: (u64, u64), ravs: (u64, u64)) -> MetricsRow {
    MetricsRow {
        language: language.into(),
        primary_country: country.into(),
        ppcrw: Share::new(1, 2).unwrap(),
        vpc: Share::new(1, 2).unwrap(),
        article_count: ras.1,
        related_article_count: ras.0,
        total_views: ravs.1,
        related_views: ravs.0,
    }
}

fn member() -> impl Strategy<Value = MetricsRow> {
    ((1u64..100_000), (1u64..10_000_000), any::<u32>(), any::<u32>()).prop_map(|(n, v, a, b)| {
        let ras = (u64::from(a) % (n + 1), n);
        let ravs = (u64::from(b) % (v + 1), v);
        row(&format!("l{a}"), "US", ras, ravs)
    })
}

proptest! {
    #[test]
    fn pooled_lies_between_members(members in prop::collection::vec(member(), 1..20)) {
        let c = aggregate_cluster("c", &members, Aggregation::Pooled).unwrap();
        let shares: Vec<f64> = members.iter().map(|m| m.ravs().unwrap().value()).collect();
        let lo = shares.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = shares.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(lo - 1e-12 <= c.popularity_share && c.popularity_share <= hi + 1e-12);
        let m = aggregate_cluster("c", &members, Aggregation::Mean).unwrap();
        prop_assert!(lo - 1e-12 <= m.popularity_share && m.popularity_share <= hi + 1e-12);
    }

    #[test]
    fn member_order_does_not_matter(members in prop::collection::vec(member(), 1..20)) {
        let mut reversed = members.clone();
        reversed.reverse();
        for mode in [Aggregation::Pooled, Aggregation::Mean] {
            let a = aggregate_cluster("c", &members, mode).unwrap();
            let b = aggregate_cluster("c", &reversed, mode).unwrap();
            prop_assert_eq!(a.popularity_share.to_bits(), b.popularity_share.to_bits());
            prop_assert_eq!(a.article_share.to_bits(), b.article_share.to_bits());
            prop_assert_eq!(a.member_languages, b.member_languages);
        }
    }

    #[test]
    fn pooling_splits_compose(members in prop::collection::vec(member(), 2..20), cut in any::<prop::sample::Index>()) {
        let at = 1 + cut.index(members.len() - 1);
        let summed = |part: &[MetricsRow], name: &str| {
            let s = |f: fn(&MetricsRow) -> u64| part.iter().map(f).sum::<u64>();
            row(name, "US", (s(|m| m.related_article_count), s(|m| m.article_count)), (s(|m| m.related_views), s(|m| m.total_views)))
        };
        let halves = [summed(&members[..at], "a"), summed(&members[at..], "b")];
        let whole = aggregate_cluster("c", &members, Aggregation::Pooled).unwrap();
        let split = aggregate_cluster("c", &halves, Aggregation::Pooled).unwrap();
        prop_assert_eq!(whole.popularity_share.to_bits(), split.popularity_share.to_bits());
        prop_assert_eq!(whole.article_share.to_bits(), split.article_share.to_bits());
    }

    #[test]
    fn single_member_is_identity(m in member()) {
        for mode in [Aggregation::Pooled, Aggregation::Mean] {
            let c = aggregate_cluster("c", std::slice::from_ref(&m), mode).unwrap();
            prop_assert_eq!(c.popularity_share, m.ravs().unwrap().value());
            prop_assert_eq!(c.article_share, m.ras().unwrap().value());
        }
    }
}

#[test]
fn pooled_weights_by_views() {
    let members = [row("a", "US", (1, 10), (10, 100)), row("b", "GB", (1, 10), (30, 100))];
    let c = aggregate_cluster("English-speaking", &members, Aggregation::Pooled).unwrap();
    assert_eq!(c.popularity_share, 0.20);
    let skewed = [row("a", "US", (1, 10), (10, 100)), row("b", "GB", (1, 10), (300, 1000))];
    let pooled = aggregate_cluster("x", &skewed, Aggregation::Pooled).unwrap();
    let mean = aggregate_cluster("x", &skewed, Aggregation::Mean).unwrap();
    assert_eq!(pooled.popularity_share, 310.0 / 1100.0);
    assert_eq!(mean.popularity_share, 0.2);
}

#[test]
fn unknown_countries_are_reported() {
    let map = ClusterMap::bundled();
    let rows = [
        row("en", "US", (1, 2), (1, 2)),
        row("xx", "ZZ", (1, 2), (1, 2)),
        row("de", "DE", (1, 4), (1, 4)),
    ];
    let assignment = assign_clusters(&rows, &map);
    assert_eq!(assignment.unassigned.len(), 1);
    assert_eq!(assignment.unassigned[0].language, "xx");
    let all = aggregate_all(&assignment, Aggregation::Pooled).unwrap();
    assert_eq!(all.len(), 2);
}

#[test]
fn empty_cluster_is_an_error() {
    assert!(matches!(
        aggregate_cluster("c", &[], Aggregation::Pooled),
        Err(ClusterError::NoMembers)
    ));
    let zero = [row("a", "US", (0, 0), (0, 0))];
    assert!(aggregate_cluster("c", &zero, Aggregation::Pooled).is_err());
}

#[test]
fn custom_map_with_comments() {
    let map = ClusterMap::parse("# mine\ncountry,cluster\nUS,North\nMX,South\n".as_bytes()).unwrap();
    assert_eq!(map.cluster_of("MX"), Some("South"));
    assert_eq!(map.cluster_of("DE"), None);
    assert!(ClusterMap::parse("country,cluster\nUS,North\nUS,South\n".as_bytes()).is_err());
}
