//! SAC trainer (placeholder).
