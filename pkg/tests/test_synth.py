from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crossmap.errors import ValidationError
from crossmap.neighbors import mean_nn_overlap
from crossmap.synth import SynthSpec, generate_planted_benchmark, generate_synthetic_paired


def mnno_xy(ds, k=10):
    return mean_nn_overlap(ds.x, ds.y, k, "cosine")


def test_shapes_and_labels():
    ds = generate_synthetic_paired(SynthSpec(n_classes=4, items_per_class=3, d_x=5, d_y=7))
    assert len(ds) == 12 and ds.x.dim == 5 and ds.y.dim == 7
    assert ds.labels[:3] == ("class0",) * 3
    assert ds.keys[0] == "item00"


def test_deterministic():
    spec = SynthSpec(seed=3, cross_map="tanh_mlp")
    a, b = generate_synthetic_paired(spec), generate_synthetic_paired(spec)
    assert a.x == b.x and a.y == b.y and a.labels == b.labels


@pytest.mark.parametrize("cross_map", ["linear", "tanh_mlp"])
def test_noiseless_structure_fully_shared(cross_map):
    # every class collapses to one point in both spaces, so each item's
    # neighbors are exactly its class mates (plus index-ordered ties) in both
    ds = generate_synthetic_paired(SynthSpec(n_classes=20, items_per_class=25, noise_x=0, noise_y=0,
                                             cross_map=cross_map, seed=1))
    assert mnno_xy(ds) == 1.0


def test_high_output_noise_destroys_overlap():
    ds = generate_synthetic_paired(SynthSpec(noise_x=0.1, noise_y=10.0, seed=1))
    assert len(ds) == 500
    assert mnno_xy(ds) < 0.3


@settings(max_examples=10)
@given(st.integers(0, 1000), st.floats(0.1, 3.0), st.floats(1.1, 4.0))
def test_more_output_noise_never_helps(seed, noise, factor):
    spec = SynthSpec(n_classes=8, items_per_class=10, d_x=6, d_y=6, noise_x=0.3, noise_y=noise, seed=seed)
    low = mnno_xy(generate_synthetic_paired(spec), 5)
    high = mnno_xy(generate_synthetic_paired(replace(spec, noise_y=noise * factor * 3)), 5)
    assert high <= low + 0.05


def test_monotone_on_average():
    levels = [0.0, 0.5, 2.0, 8.0]
    means = [np.mean([mnno_xy(generate_synthetic_paired(SynthSpec(noise_x=0.1, noise_y=n, seed=s))) for s in range(3)])
             for n in levels]
    assert all(a >= b for a, b in zip(means, means[1:]))


def test_invalid_synth_settings():
    with pytest.raises(ValidationError):
        SynthSpec(noise_y=-1)
    with pytest.raises(ValidationError):
        SynthSpec(cross_map="cubic")


def test_planted_benchmark():
    emb, bench = generate_planted_benchmark(30, 5, 40, seed=2)
    assert len(emb) == 30 and emb.dim == 5 and len(bench) == 40
    assert all(-1.0 <= r <= 1.0 for _, _, r in bench.pairs)
    assert len({tuple(sorted(p[:2])) for p in bench.pairs}) == 40
