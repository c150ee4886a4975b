use std::cmp::Ordering;
use std::io::Write;

use crate::metrics::{MetricsRow, Share};

/// Percent with two decimals, rounded half-up: 0.31578 → `31.58%`.
pub fn format_percent(share: Share) -> String {
    let (num, den) = (u128::from(share.numerator()), u128::from(share.denominator()));
    let basis_points = (20_000 * num + den) / (2 * den);
    format!("{}.{:02}%", basis_points / 100, basis_points % 100)
}

fn ravs_desc(a: &MetricsRow, b: &MetricsRow) -> Ordering {
    b.ravs().cmp(&a.ravs()).then_with(|| a.language.cmp(&b.language))
}

/// Descending by related-views share, ties by language code.
pub fn sort_by_ravs(rows: &[MetricsRow]) -> Vec<&MetricsRow> {
    let mut sorted: Vec<&MetricsRow> = rows.iter().collect();
    sorted.sort_by(|a, b| ravs_desc(a, b));
    sorted
}

pub fn emit_table<W: Write>(rows: &[MetricsRow], mut sink: W) -> std::io::Result<()> {
    writeln!(
        sink,
        "language\tprimary_country\tPPCRW\tVPC\tRAS\tRAVS\tarticles\trelated_articles"
    )?;
    let percent = |s: Option<Share>| s.map_or_else(|| "NA".to_owned(), format_percent);
    for row in sort_by_ravs(rows) {
        writeln!(
            sink,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            row.language,
            row.primary_country,
            format_percent(row.ppcrw),
            format_percent(row.vpc),
            percent(row.ras()),
            percent(row.ravs()),
            row.article_count,
            row.related_article_count
        )?;
    }
    sink.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(language: &str, ravs_bp: u64) -> MetricsRow {
        MetricsRow {
            language: language.into(),
            primary_country: "US".into(),
            ppcrw: Share::new(60, 100).unwrap(),
            vpc: Share::new(80, 100).unwrap(),
            article_count: 10_000,
            related_article_count: 1631,
            total_views: 10_000,
            related_views: ravs_bp,
        }
    }

    fn languages(output: &[u8]) -> Vec<String> {
        String::from_utf8(output.to_vec())
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split('\t').next().unwrap().to_owned())
            .collect()
    }

    #[test]
    fn percent_format() {
        assert_eq!(format_percent(Share::new(3158, 10_000).unwrap()), "31.58%");
        assert_eq!(format_percent(Share::new(6, 10).unwrap()), "60.00%");
        assert_eq!(format_percent(Share::new(1, 3).unwrap()), "33.33%");
        assert_eq!(format_percent(Share::new(2, 3).unwrap()), "66.67%");
        assert_eq!(format_percent(Share::one()), "100.00%");
    }

    #[test]
    fn sorted_by_ravs() {
        let mut out = Vec::new();
        emit_table(&[row("it", 1889), row("en", 3158)], &mut out).unwrap();
        assert_eq!(languages(&out), ["en", "it"]);
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text.lines().nth(1).unwrap(),
            "en\tUS\t60.00%\t80.00%\t16.31%\t31.58%\t10000\t1631"
        );
    }

    #[test]
    fn single_row_and_ties() {
        let mut out = Vec::new();
        emit_table(&[row("de", 10)], &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap().lines().count(), 2);

        let mut out = Vec::new();
        emit_table(&[row("pl", 10), row("de", 10)], &mut out).unwrap();
        assert_eq!(languages(&out), ["de", "pl"]);
    }
}
