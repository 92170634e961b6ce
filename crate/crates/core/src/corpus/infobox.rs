use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Structured fields scraped from an encyclopedia info-box.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoboxRecord {
    #[serde(rename = "entity")]
    pub entity_name: String,
    #[serde(default)]
    pub domain: String,
    #[serde(default)]
    pub fields: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoboxFilterReport {
    pub kept: usize,
    pub missing_industry: usize,
    pub missing_domain: usize,
    pub below_min_employees: usize,
    /// Records whose employee count could not be parsed.
    pub unparseable_employees: usize,
}

// "1,200", "500+", "c. 3000 (2021)" all parse; "ten" does not.
fn parse_employees(raw: &str) -> Option<u64> {
    let start = raw.find(|c: char| c.is_ascii_digit())?;
    let digits: String = raw[start..]
        .chars()
        .take_while(|c| c.is_ascii_digit() || *c == ',' || *c == '_')
        .filter(char::is_ascii_digit)
        .collect();
    digits.parse().ok()
}

/// Keeps companies that name an industry, carry a website domain and employ at
/// least `min_employees` people.
pub fn filter_relevant_infobox(
    records: &[InfoboxRecord],
    min_employees: u64,
) -> (Vec<InfoboxRecord>, InfoboxFilterReport) {
    let mut report = InfoboxFilterReport::default();
    let mut kept = Vec::new();
    for record in records {
        let field = |name: &str| record.fields.get(name).map(|v| v.trim()).unwrap_or("");
        if field("industry").is_empty() {
            report.missing_industry += 1;
            continue;
        }
        if record.domain.trim().is_empty() {
            report.missing_domain += 1;
            continue;
        }
        match parse_employees(field("num_employees")) {
            None => report.unparseable_employees += 1,
            Some(n) if n < min_employees => report.below_min_employees += 1,
            Some(_) => kept.push(record.clone()),
        }
    }
    report.kept = kept.len();
    (kept, report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(industry: &str, employees: &str, domain: &str) -> InfoboxRecord {
        let mut fields = BTreeMap::new();
        fields.insert("industry".to_string(), industry.to_string());
        fields.insert("num_employees".to_string(), employees.to_string());
        InfoboxRecord { entity_name: "Acme".into(), domain: domain.into(), fields }
    }

    #[test]
    fn keeps_relevant_record() {
        let (kept, report) = filter_relevant_infobox(&[rec("software", "500", "x.com")], 25);
        assert_eq!(kept.len(), 1);
        assert_eq!(report.kept, 1);
    }

    #[test]
    fn empty_industry_excluded() {
        let (kept, report) = filter_relevant_infobox(&[rec("", "500", "x.com")], 25);
        assert!(kept.is_empty());
        assert_eq!(report.missing_industry, 1);
    }

    #[test]
    fn unparseable_employees_skip_counted() {
        let (kept, report) = filter_relevant_infobox(&[rec("software", "ten", "x.com")], 25);
        assert!(kept.is_empty());
        assert_eq!(report.unparseable_employees, 1);
    }

    #[test]
    fn employee_formats_and_threshold() {
        assert_eq!(parse_employees("1,200"), Some(1200));
        assert_eq!(parse_employees("500+"), Some(500));
        assert_eq!(parse_employees("c. 3000 (2021)"), Some(3000));
        let (kept, report) = filter_relevant_infobox(
            &[rec("chips", "24", "a.com"), rec("chips", "25", "b.com"), rec("chips", "99", "")],
            25,
        );
        assert_eq!(kept.len(), 1);
        assert_eq!(kept[0].domain, "b.com");
        assert_eq!(report.below_min_employees, 1);
        assert_eq!(report.missing_domain, 1);
    }
}
