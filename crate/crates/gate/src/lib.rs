//! Holds the acceptance gate in `tests/acceptance.rs`. The gate lives in its
//! own package so that it runs after every other test target.
