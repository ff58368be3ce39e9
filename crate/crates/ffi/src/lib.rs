//! C ABI bindings (work in progress).
