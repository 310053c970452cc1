"""First-order penalty methods for Stackelberg games with many followers."""
