//! Set policies (placeholder).
