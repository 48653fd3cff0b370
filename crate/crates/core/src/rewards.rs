//! Matching reward and relabeling (placeholder).
