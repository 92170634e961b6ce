use url::Url;

use super::{CorpusError, Result};

/// URL path fragments that mark a page as informative about the company.
pub const DEFAULT_KEYWORDS: [&str; 8] = [
    "about",
    "about_us",
    "products",
    "product",
    "technology",
    "solutions",
    "services",
    "company",
];

fn parse_lenient(raw: &str) -> Option<Url> {
    let raw = raw.trim();
    Url::parse(raw)
        .ok()
        .filter(|u| u.host_str().is_some())
        .or_else(|| Url::parse(&format!("http://{raw}")).ok())
}

/// Normalizes a URL or bare host to its lowercase registrable domain.
///
/// Scheme, `www.`, port and path are dropped. The registrable part is taken
/// from the bundled public-suffix list, so `shop.example.co.uk` becomes
/// `example.co.uk`. Hosts the list does not know (`localhost`, IPs) are
/// returned as-is.
pub fn normalize_domain(raw: &str) -> Result<String> {
    let url = parse_lenient(raw).ok_or_else(|| CorpusError::InvalidUrl(raw.to_string()))?;
    let host = match url.host() {
        Some(url::Host::Domain(d)) => d,
        Some(_) => return Ok(url.host_str().unwrap_or_default().to_string()),
        None => return Err(CorpusError::InvalidUrl(raw.to_string())),
    }
    .trim_end_matches('.')
        .to_ascii_lowercase();
    let host = host.strip_prefix("www.").unwrap_or(&host).to_string();
    if host.is_empty() {
        return Err(CorpusError::InvalidUrl(raw.to_string()));
    }
    Ok(psl::domain_str(&host).map(str::to_string).unwrap_or(host))
}

fn is_home(url: &Url) -> bool {
    let path = url.path().trim_end_matches('/');
    path.is_empty() || matches!(path, "/index.html" | "/index.htm" | "/index.php")
}

/// Keeps the home page plus every URL whose path contains one of `keywords`
/// (case-insensitive). Input order is preserved and duplicates are dropped.
pub fn select_urls<S: AsRef<str>>(urls: &[S], keywords: &[S]) -> Vec<String> {
    let keywords: Vec<String> = keywords.iter().map(|k| k.as_ref().to_lowercase()).collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for raw in urls {
        let raw = raw.as_ref();
        let keep = match parse_lenient(raw) {
            Some(url) => {
                let path = url.path().to_lowercase();
                is_home(&url) || keywords.iter().any(|k| path.contains(k.as_str()))
            }
            None => {
                let lower = raw.to_lowercase();
                keywords.iter().any(|k| lower.contains(k.as_str()))
            }
        };
        if keep && seen.insert(raw.to_string()) {
            out.push(raw.to_string());
        }
    }
    out
}
