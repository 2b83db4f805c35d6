from __future__ import annotations

from hypothesis import given
from hypothesis import strategies as st

from isingcdr.seeding import derive_int, derive_rng, derive_seed


def test_roles_and_indices_separate_streams():
    a = derive_rng(1, "shots", 0).random(4)
    assert (a == derive_rng(1, "shots", 0).random(4)).all()
    assert (a != derive_rng(1, "shots", 1).random(4)).all()
    assert (a != derive_rng(1, "training", 0).random(4)).all()
    assert (a != derive_rng(2, "shots", 0).random(4)).all()


@given(st.integers(0, 2**32), st.text(max_size=8), st.lists(st.integers(0, 1000), max_size=3))
def test_derive_int_is_stable_63_bit(master, role, idx):
    v = derive_int(master, role, *idx)
    assert 0 <= v < 2**63 and v == derive_int(master, role, *idx)
    assert derive_seed(master, role, *idx).entropy == master
