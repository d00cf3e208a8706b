"""Potts regularization: energy, exact minimization, mask rendering."""

import numpy as np
import pytest

from aquascan.mrf import (
    LabelVolume,
    ProbabilityVolume,
    energy,
    labels_to_masks,
    load_probability_volume,
    regularize,
    save_probability_volume,
)


def enumerated_minimum(probs: np.ndarray, lam: float) -> float:
    """Exact minimum energy by trying every binary labeling."""
    t, h, w = probs.shape
    n = t * h * w
    count = 1 << n
    bits = (np.arange(count, dtype=np.uint32)[:, None] >> np.arange(n)[None, :]) & 1
    p = probs.ravel()
    unary = p.sum() + bits @ (1.0 - 2.0 * p)
    idx = np.arange(n).reshape(t, h, w)
    cuts = np.zeros(count)
    for a, b in (
        (idx[:, :, 1:], idx[:, :, :-1]),
        (idx[:, 1:, :], idx[:, :-1, :]),
        (idx[1:, :, :], idx[:-1, :, :]),
    ):
        if a.size:
            cuts += (bits[:, a.ravel()] != bits[:, b.ravel()]).sum(axis=1)
    return float((unary + lam * cuts).min())


class TestVolumes:
    def test_probability_validation(self):
        ProbabilityVolume(np.full((2, 2, 2), 0.5), stride=4, origin=(1, 1))
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            ProbabilityVolume(np.full((1, 1, 1), 1.5), stride=1, origin=(0, 0))
        with pytest.raises(ValueError, match="stride"):
            ProbabilityVolume(np.full((1, 1, 1), 0.5), stride=0, origin=(0, 0))
        with pytest.raises(ValueError, match="shape"):
            ProbabilityVolume(np.zeros((2, 2)), stride=1, origin=(0, 0))

    def test_label_validation(self):
        LabelVolume(np.ones((1, 2, 2), dtype=np.uint8), stride=1, origin=(0, 0))
        with pytest.raises(ValueError, match="0 or 1"):
            LabelVolume(np.full((1, 1, 1), 2), stride=1, origin=(0, 0))


class TestEnergy:
    def test_hand_value(self):
        vol = ProbabilityVolume(np.array([0.8, 0.4]).reshape(2, 1, 1), 1, (0, 0))
        lab = LabelVolume(np.array([1, 0]).reshape(2, 1, 1), 1, (0, 0))
        # unary (1 - 0.8) + 0.4, one temporal disagreement at weight 0.5
        assert energy(vol, lab, 0.5) == pytest.approx(1.1, abs=1e-12)

    def test_counts_each_axis(self):
        probs = np.full((2, 2, 2), 0.5)
        vol = ProbabilityVolume(probs, 1, (0, 0))
        lab = np.zeros((2, 2, 2), dtype=np.uint8)
        lab[0, 0, 0] = 1  # 3 neighbors disagree: right, down, next frame
        e = energy(vol, LabelVolume(lab, 1, (0, 0)), 2.0)
        assert e == pytest.approx(0.5 * 8 + 2.0 * 3 - 0.5 + 0.5)

    def test_shape_mismatch_rejected(self):
        vol = ProbabilityVolume(np.full((1, 2, 2), 0.5), 1, (0, 0))
        lab = LabelVolume(np.zeros((1, 2, 3), dtype=np.uint8), 1, (0, 0))
        with pytest.raises(ValueError, match="does not match"):
            energy(vol, lab, 1.0)
        with pytest.raises(ValueError, match="lambda"):
            energy(vol, LabelVolume(np.zeros((1, 2, 2), dtype=np.uint8), 1, (0, 0)), -1.0)


class TestRegularize:
    def test_lambda_zero_is_thresholding(self):
        rng = np.random.default_rng(80)
        probs = rng.choice([0.2, 0.3, 0.5, 0.7, 0.9], size=(3, 4, 5))
        vol = ProbabilityVolume(probs, 11, (5, 5))
        labels = regularize(vol, 0.0)
        # strictly above one half becomes water; exactly one half does not
        assert np.array_equal(labels.labels, (probs > 0.5).astype(np.uint8))
        assert labels.stride == 11 and labels.origin == (5, 5)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(81)
        shapes = [(2, 2, 2), (1, 3, 3), (2, 3, 2), (3, 2, 2), (2, 1, 4)]
        for lam in (0.0, 0.2, 1.0, 5.0):
            for shape in shapes:
                for _ in range(3):
                    probs = rng.uniform(0.01, 0.99, size=shape)
                    vol = ProbabilityVolume(probs, 1, (0, 0))
                    labels = regularize(vol, lam)
                    got = energy(vol, labels, lam)
                    want = enumerated_minimum(probs, lam)
                    assert got == pytest.approx(want, abs=1e-9), (shape, lam)

    def test_ambivalent_probabilities_become_nonwater(self):
        vol = ProbabilityVolume(np.full((2, 3, 3), 0.5), 1, (0, 0))
        labels = regularize(vol, 1.0)
        assert not labels.labels.any()

    def test_large_lambda_forces_constant(self):
        rng = np.random.default_rng(82)
        probs = rng.uniform(0.0, 1.0, size=(3, 3, 3))
        vol = ProbabilityVolume(probs, 1, (0, 0))
        labels = regularize(vol, 100.0).labels
        assert labels.min() == labels.max()
        side = 1 if probs.sum() < probs.size - probs.sum() else 0
        # the constant side with smaller unary total wins
        assert labels.max() == (1 - side if probs.sum() != probs.size / 2 else labels.max())

    def test_smooth_majority_wins_inside_blob(self):
        # a solid high-probability block with one dissenting node flips it
        probs = np.full((1, 3, 3), 0.9)
        probs[0, 1, 1] = 0.3
        vol = ProbabilityVolume(probs, 1, (0, 0))
        assert regularize(vol, 0.3).labels.all()
        # without smoothing the dissenter stays nonwater
        assert regularize(vol, 0.0).labels[0, 1, 1] == 0

    def test_deterministic(self):
        rng = np.random.default_rng(83)
        probs = rng.uniform(size=(4, 5, 6))
        vol = ProbabilityVolume(probs, 1, (0, 0))
        a = regularize(vol, 0.7).labels
        b = regularize(vol, 0.7).labels
        assert np.array_equal(a, b)

    def test_rejects_negative_lambda(self):
        vol = ProbabilityVolume(np.full((1, 1, 1), 0.5), 1, (0, 0))
        with pytest.raises(ValueError, match="lambda"):
            regularize(vol, -0.1)


class TestMaskRendering:
    def brute_force(self, labels, frame_dims, stride, origin):
        width, height = frame_dims
        nt, nh, nw = labels.shape
        out = np.zeros((nt, height, width), dtype=np.uint8)
        for y in range(height):
            for x in range(width):
                jx = int(np.argmin([abs(x - (origin[0] + j * stride)) for j in range(nw)]))
                jy = int(np.argmin([abs(y - (origin[1] + j * stride)) for j in range(nh)]))
                out[:, y, x] = labels[:, jy, jx]
        return out

    def test_matches_nearest_node_oracle(self):
        rng = np.random.default_rng(84)
        for stride, origin, dims in [(11, (5, 5), (40, 30)), (2, (1, 1), (9, 7)), (3, (2, 2), (10, 8))]:
            nw = max(1, (dims[0] - origin[0] - 1) // stride + 1)
            nh = max(1, (dims[1] - origin[1] - 1) // stride + 1)
            grid = rng.integers(0, 2, size=(2, nh, nw), dtype=np.uint8)
            lab = LabelVolume(grid, stride, origin)
            masks = labels_to_masks(lab, dims)
            assert np.array_equal(masks.masks, self.brute_force(grid, dims, stride, origin))

    def test_midpoint_tie_goes_to_smaller_node(self):
        # stride 2, origin 1: pixel 2 is equidistant from nodes at 1 and 3
        grid = np.array([[[0, 1]]], dtype=np.uint8)
        lab = LabelVolume(grid, 2, (1, 0))
        masks = labels_to_masks(lab, (4, 1))
        assert masks.masks[0, 0].tolist() == [0, 0, 0, 1]

    def test_bad_dims_rejected(self):
        lab = LabelVolume(np.ones((1, 1, 1), dtype=np.uint8), 1, (0, 0))
        with pytest.raises(ValueError, match="dims"):
            labels_to_masks(lab, (0, 5))


class TestPersistence:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(85)
        vol = ProbabilityVolume(rng.uniform(size=(3, 2, 4)), 7, (3, 2))
        path = tmp_path / "probs.bin"
        save_probability_volume(vol, path)
        loaded = load_probability_volume(path)
        assert np.array_equal(loaded.probs, vol.probs)
        assert loaded.stride == 7 and loaded.origin == (3, 2)

    def test_truncated_payload_rejected(self, tmp_path):
        vol = ProbabilityVolume(np.full((1, 2, 2), 0.5), 1, (0, 0))
        path = tmp_path / "probs.bin"
        save_probability_volume(vol, path)
        data = path.read_bytes()
        path.write_bytes(data[:-4])
        with pytest.raises(ValueError, match="payload"):
            load_probability_volume(path)

    def test_garbage_header_rejected(self, tmp_path):
        path = tmp_path / "probs.bin"
        path.write_bytes(b"not a header\n\x00\x00")
        with pytest.raises(ValueError, match="corrupt"):
            load_probability_volume(path)
