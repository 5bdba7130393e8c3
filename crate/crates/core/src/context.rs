/// Numerical policy shared by the higher-level operations.
///
/// Everything is double precision with explicit tolerances; the defaults match
/// the documented contracts (1e-9 relative comparisons, 1e7 enumeration nodes).
#[derive(Debug, Clone, Copy)]
pub struct Context {
    /// Default relative tolerance for value comparisons.
    pub rel_tol: f64,
    /// Half-width of the band around 1 inside which a determinant counts as 1.
    pub unit_det_tol: f64,
    /// Cap on candidate nodes visited by one enumeration call.
    pub enum_budget: u64,
}

impl Default for Context {
    fn default() -> Self {
        Context {
            rel_tol: 1e-9,
            unit_det_tol: 1e-9,
            enum_budget: 10_000_000,
        }
    }
}

impl Context {
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.enum_budget = budget;
        self
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }
}
