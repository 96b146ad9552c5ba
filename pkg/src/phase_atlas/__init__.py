"""Exact and numeric tools for a third-order Painleve-type system and its phase-space atlas."""
