//! Sub-goal cycling evaluation (placeholder).
