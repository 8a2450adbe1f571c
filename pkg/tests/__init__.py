# Tests for conformal-density
