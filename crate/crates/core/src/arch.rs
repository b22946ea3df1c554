//! Comparator network architectures (placeholder).
