//! Deterministic inputs for the benchmarks.

use langcov::{EntityId, KeepSet, SlimEntity};

/// Properties and wikis a typical run keeps.
pub fn keep() -> KeepSet {
    KeepSet::new(
        [17, 19, 27, 31, 276, 495].map(EntityId::property),
        ["enwiki", "dewiki", "frwiki"],
    )
    .expect("static keep-set")
}

fn statement(prop: u64, value: u64) -> String {
    format!(
        r#"{{"mainsnak":{{"snaktype":"value","property":"P{prop}","datavalue":{{"value":{{"entity-type":"item","numeric-id":{value},"id":"Q{value}"}},"type":"wikibase-entityid"}},"datatype":"wikibase-item"}},"type":"statement","rank":"normal"}}"#
    )
}

/// Dump text with `n` entity lines shaped like real ones: labels, a time
/// claim the parser must skip, and sitelinks to wikis outside the keep-set.
pub fn dump_text(n: u64) -> String {
    let mut out = String::from("[\n");
    for i in 1..=n {
        let line = format!(
            concat!(
                r#"{{"type":"item","id":"Q{i}","labels":{{"en":{{"language":"en","value":"Item {i}"}}}},"#,
                r#""claims":{{"P31":[{p31}],"P27":[{p27}],"P19":[{p19}],"#,
                r#""P569":[{{"mainsnak":{{"snaktype":"value","property":"P569","datavalue":{{"value":{{"time":"+1950-01-01T00:00:00Z"}},"type":"time"}}}},"rank":"normal"}}]}},"#,
                r#""sitelinks":{{"enwiki":{{"site":"enwiki","title":"Item {i}","badges":[]}},"itwiki":{{"site":"itwiki","title":"Voce {i}","badges":[]}}}}}}"#
            ),
            i = i,
            p31 = statement(31, 5),
            p27 = statement(27, 30 + i % 5),
            p19 = statement(19, 1 + i % 1000),
        );
        out.push_str(&line);
        out.push_str(if i < n { ",\n" } else { "\n" });
    }
    out.push_str("]\n");
    out
}

/// `n` slim entities: the first thousand are places chained three deep
/// towards a handful of countries, the rest are items pointing at them.
pub fn world(n: u64) -> Vec<SlimEntity> {
    let p = EntityId::property;
    let q = EntityId::item;
    (1..=n)
        .map(|i| {
            let e = SlimEntity::new(q(i)).with_sitelink("enwiki", format!("Item {i}"));
            match i {
                1..=10 => e.with_claim(p(17), q(i)),
                11..=100 => e.with_claim(p(17), q(1 + i % 10)),
                101..=1000 => e.with_claim(p(17), q(11 + i % 90)),
                _ => e
                    .with_claim(p(19), q(101 + i % 900))
                    .with_claim(p(27), q(1 + i % 10))
                    .with_sitelink("dewiki", format!("Objekt {i}")),
            }
        })
        .collect()
}
