//! Link-based relatedness. `A` and `B` are the inlink sets of the two
//! entities and `W` the total entity count; logarithms are natural.

use super::{ConceptError, LinkGraph, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Counts {
    pub a: usize,
    pub b: usize,
    pub inter: usize,
    pub w: usize,
}

impl Counts {
    pub(crate) fn of(a: &str, b: &str, g: &LinkGraph) -> Result<Self> {
        for id in [a, b] {
            if !g.contains(id) {
                return Err(ConceptError::UnknownEntity(id.to_string()));
            }
        }
        let (sa, sb) = (g.inlinks(a), g.inlinks(b));
        Ok(Self { a: sa.len(), b: sb.len(), inter: sa.intersection(sb).count(), w: g.w() })
    }

    fn union(&self) -> usize {
        self.a + self.b - self.inter
    }

    fn require_links(&self) -> Result<()> {
        if self.a == 0 || self.b == 0 {
            Err(ConceptError::NoInlinks)
        } else {
            Ok(())
        }
    }

    pub(crate) fn milne_witten(&self) -> Result<f64> {
        self.require_links()?;
        let (lo, hi) = (self.a.min(self.b) as f64, self.a.max(self.b) as f64);
        if (self.w as f64) <= lo {
            return Err(ConceptError::DegenerateGraph);
        }
        if self.inter == 0 {
            return Ok(0.0);
        }
        let d = (hi.ln() - (self.inter as f64).ln()) / ((self.w as f64).ln() - lo.ln());
        Ok((1.0 - d).max(0.0))
    }

    pub(crate) fn jaccard(&self) -> f64 {
        match self.union() {
            0 => 0.0,
            u => self.inter as f64 / u as f64,
        }
    }

    pub(crate) fn cond_prob(&self) -> Result<f64> {
        if self.a == 0 {
            return Err(ConceptError::NoInlinks);
        }
        Ok(self.inter as f64 / self.a as f64)
    }

    fn ratio(&self) -> Result<f64> {
        self.require_links()?;
        if (self.w as f64) <= self.a.min(self.b) as f64 {
            return Err(ConceptError::DegenerateGraph);
        }
        Ok(self.inter as f64 * self.w as f64 / (self.a as f64 * self.b as f64))
    }

    pub(crate) fn pmi(&self) -> Result<f64> {
        let r = self.ratio()?;
        Ok(if self.inter == 0 { 0.0 } else { r.ln() })
    }

    pub(crate) fn barabasi_albert(&self) -> Result<f64> {
        Ok(self.ratio()?.min(1.0))
    }
}

/// Milne-Witten relatedness in [0,1].
pub fn milne_witten(a: &str, b: &str, g: &LinkGraph) -> Result<f64> {
    Counts::of(a, b, g)?.milne_witten()
}

/// |A∩B| / |A∪B|, 0 when both sets are empty.
pub fn jaccard(a: &str, b: &str, g: &LinkGraph) -> Result<f64> {
    Ok(Counts::of(a, b, g)?.jaccard())
}

/// |A∩B| / |A|; not symmetric.
pub fn cond_prob(a: &str, b: &str, g: &LinkGraph) -> Result<f64> {
    Counts::of(a, b, g)?.cond_prob()
}

/// ln(|A∩B|·W / (|A|·|B|)), 0 when the sets are disjoint.
pub fn pmi(a: &str, b: &str, g: &LinkGraph) -> Result<f64> {
    Counts::of(a, b, g)?.pmi()
}

/// Observed co-links over the degree-proportional expectation, capped at 1.
pub fn barabasi_albert(a: &str, b: &str, g: &LinkGraph) -> Result<f64> {
    Counts::of(a, b, g)?.barabasi_albert()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(a: usize, b: usize, inter: usize, w: usize) -> Counts {
        Counts { a, b, inter, w }
    }

    fn close(x: f64, y: f64) {
        assert!((x - y).abs() < 1e-6, "{x} vs {y}");
    }

    #[test]
    fn worked_values() {
        let c = counts(10, 20, 5, 100);
        close(c.milne_witten().unwrap(), 0.397940);
        close(c.pmi().unwrap(), 0.916291);
        close(c.cond_prob().unwrap(), 0.5);
        close(c.barabasi_albert().unwrap(), 1.0);
        close(counts(10, 20, 1, 100).barabasi_albert().unwrap(), 0.5);
        close(counts(10, 10, 10, 100).milne_witten().unwrap(), 1.0);
        close(counts(10, 10, 0, 100).milne_witten().unwrap(), 0.0);
        close(counts(10, 10, 1, 100).pmi().unwrap(), 0.0);
        close(counts(10, 20, 0, 100).pmi().unwrap(), 0.0);
    }

    #[test]
    fn errors() {
        assert!(matches!(counts(5, 8, 2, 5).milne_witten(), Err(ConceptError::DegenerateGraph)));
        assert!(counts(5, 8, 2, 5).milne_witten().unwrap_err().to_string().contains("degenerate graph"));
        assert!(matches!(counts(0, 8, 0, 50).cond_prob(), Err(ConceptError::NoInlinks)));
        assert_eq!(counts(0, 0, 0, 50).jaccard(), 0.0);
    }

    #[test]
    fn set_examples() {
        let mut g = LinkGraph::new();
        g.add_entity("a", ["1", "2", "3"]);
        g.add_entity("b", ["2", "3", "4"]);
        g.add_entity("c", ["7"]);
        assert_eq!(jaccard("a", "b", &g).unwrap(), 0.5);
        assert_eq!(jaccard("a", "a", &g).unwrap(), 1.0);
        assert_eq!(jaccard("a", "c", &g).unwrap(), 0.0);
        assert_eq!(cond_prob("a", "a", &g).unwrap(), 1.0);
        assert!(matches!(milne_witten("a", "zz", &g), Err(ConceptError::UnknownEntity(_))));
    }
}
