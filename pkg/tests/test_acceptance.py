"""Acceptance suite: one test per release gate, one printed line per gate.

The reference-results consistency gate (test_reference_table_totals) is known
red for two of the five published rows: their rounded per-class values are
inconsistent with their rounded totals by 6.7e-4, above the 5e-4 gate, so no
implementation can reproduce them. The remaining gates are green.
"""

import time

import numpy as np
import pytest

from scribbleseg.metrics import DiceReport, dice_mask, dice_report
from scribbleseg.morphology import StructuringElement, close_bone_label, close_mask, dilate, erode
from scribbleseg.phantom import PhantomSpec, generate_phantom, generate_scribbles
from scribbleseg.volumes import (
    UNLABELED,
    LabelVolume,
    mask_labels_to_planes,
    normalize_intensities,
)
from scribbleseg.walker import (
    RandomWalkerConfig,
    edge_weights,
    propagate_slice,
    seed_grid_from_records,
    slice_potentials,
)

from test_walker import dense_reference_potentials

CFG = RandomWalkerConfig()
DISK2 = StructuringElement("disk", 2)

# published cross-validation reference results this artifact's aggregate
# semantics mirror: columns are total / bone / corroded screw / screw
REFERENCE_CV_ROWS = (
    ("dense-annotation/no-closing", 0.750, 0.825, 0.538, 0.888),
    ("dense-annotation/closing", 0.703, 0.756, 0.472, 0.880),
    ("random-walk/no-closing", 0.687, 0.743, 0.415, 0.905),
    ("random-walk/closing", 0.751, 0.798, 0.541, 0.916),
    ("scribble/no-closing", 0.482, 0.568, 0.293, 0.585),
)


def _status(ok: bool) -> str:
    return "PASS" if ok else "FAIL"


@pytest.fixture(scope="module")
def phantom_fold_zero():
    """Default 40x128x128 phantom with per-plane propagation artifacts."""
    spec = PhantomSpec(rng_seed=0)
    gray, labels = generate_phantom(spec)
    scribbles = generate_scribbles(
        labels, z_stride=10, strokes_per_label=14, stroke_len=10, rng_seed=0,
        allocation="area",
    )
    normalized = normalize_intensities(gray)
    planes = {}
    for z in scribbles.planes():
        records = scribbles.for_plane(z)
        predicted, pmap = propagate_slice(
            normalized.data[z], records, CFG, return_potentials=True
        )
        planes[z] = {
            "image": normalized.data[z],
            "records": records,
            "seeds": seed_grid_from_records(normalized.data[z].shape, records),
            "labels": predicted,
            "potentials": pmap.potentials,
        }
    return spec, labels, scribbles, planes


def test_oracle_equivalence_cg_vs_dense():
    # 100 random slices up to 8x8, 2-4 random seeds, beta in {0, 90, 130};
    # CG potentials must match an independent dense direct solve to 1e-5
    rng = np.random.default_rng(20240901)
    betas = (0.0, 90.0, 130.0)
    worst = 0.0
    start = time.perf_counter()
    for case in range(100):
        ny = int(rng.integers(2, 9))
        nx = int(rng.integers(2, 9))
        img = rng.random((ny, nx))
        n_seeds = int(rng.integers(2, 5))
        seeds = np.full((ny, nx), UNLABELED, dtype=np.uint8)
        positions = rng.choice(ny * nx, size=min(n_seeds, ny * nx), replace=False)
        for i, pos in enumerate(positions):
            seeds[divmod(int(pos), nx)] = int(rng.integers(0, 4)) if i else i
        # guarantee at least two distinct labels
        seeds[divmod(int(positions[0]), nx)] = 0
        seeds[divmod(int(positions[1]), nx)] = 1
        cfg = RandomWalkerConfig(beta=betas[case % 3])
        pmap = slice_potentials(img, seeds, cfg)
        expected = dense_reference_potentials(img, seeds, cfg.beta, cfg.weight_floor)
        worst = max(worst, float(np.abs(pmap.potentials - expected).max()))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-5 and elapsed < 10.0
    print(
        f"[{_status(ok)}] oracle equivalence: max |cg - dense| = {worst:.3e} "
        f"(gate 1e-5), runtime {elapsed:.2f}s (gate 10s)"
    )
    assert worst < 1e-5
    assert elapsed < 10.0


def test_simplex_and_seed_fidelity_on_phantom(phantom_fold_zero):
    _, _, _, planes = phantom_fold_zero
    worst_sum = 0.0
    worst_low = 0.0
    worst_high = 1.0
    fidelity = True
    for data in planes.values():
        pot = data["potentials"]
        worst_sum = max(worst_sum, float(np.abs(pot.sum(axis=0) - 1.0).max()))
        worst_low = min(worst_low, float(pot.min()))
        worst_high = max(worst_high, float(pot.max()))
        seeded = data["seeds"] != UNLABELED
        fidelity &= bool((data["labels"][seeded] == data["seeds"][seeded]).all())
    ok = worst_sum <= 1e-5 and worst_low >= 0.0 and worst_high <= 1.0 + 1e-7 and fidelity
    print(
        f"[{_status(ok)}] simplex + seed fidelity: max |sum-1| = {worst_sum:.2e} "
        f"(gate 1e-5), range [{worst_low:.2e}, {worst_high:.8f}] "
        f"(gate [0, 1+1e-7]), scribbles kept: {fidelity}"
    )
    assert worst_sum <= 1e-5
    assert worst_low >= 0.0 and worst_high <= 1.0 + 1e-7
    assert fidelity


def test_harmonicity_of_unseeded_pixels(phantom_fold_zero):
    _, _, _, planes = phantom_fold_zero
    gate = 10 * CFG.solver_tol
    rng = np.random.default_rng(7)
    defects = []
    per_plane = 250  # 4 planes x 250 = 1000 sampled pixels
    for data in planes.values():
        img = data["image"]
        pot = data["potentials"].reshape(4, -1)
        edges, weights = edge_weights(img, CFG)
        degree = np.zeros(img.size)
        acc = np.zeros((4, img.size))
        for (a, b), w in zip(edges.T, weights):
            degree[a] += w
            degree[b] += w
            acc[:, a] += w * pot[:, b]
            acc[:, b] += w * pot[:, a]
        averages = acc / degree
        unseeded = np.flatnonzero(data["seeds"].ravel() == UNLABELED)
        sample = rng.choice(unseeded, size=per_plane, replace=False)
        defects.append(np.abs(pot[:, sample] - averages[:, sample]).max(axis=0))
    worst = float(np.concatenate(defects).max())
    ok = worst <= gate
    print(
        f"[{_status(ok)}] harmonicity: max defect over 1000 unseeded pixels = "
        f"{worst:.3e} (gate 10*solver_tol = {gate:.0e})"
    )
    assert worst <= gate


def test_phantom_propagation_quality(phantom_fold_zero):
    spec, truth, scribbles, planes = phantom_fold_zero
    coverage = scribbles.coverage_by_plane(spec.dims)
    fg_means = {}
    for z, data in planes.items():
        dice = [dice_mask(data["labels"] == l, truth.data[z] == l) for l in (1, 2, 3)]
        fg_means[z] = float(np.mean(dice))
    min_cov = min(coverage.values())
    worst_fg = min(fg_means.values())

    # noise-free step-image micro-case: exact recovery, Dice 1.0 per label
    img = np.full((8, 8), 0.2)
    img[:, 4:] = 0.8
    step_truth = np.zeros((8, 8), dtype=np.uint8)
    step_truth[:, 4:] = 1
    step_out = propagate_slice(img, [(4, 1, 0), (3, 6, 1)], RandomWalkerConfig(beta=90.0))
    step_dice = [
        dice_mask(step_out == label, step_truth == label) for label in (0, 1)
    ]
    ok = min_cov >= 0.01 and worst_fg >= 0.90 and step_dice == [1.0, 1.0]
    print(
        f"[{_status(ok)}] propagation quality: coverage >= {min_cov:.4f} "
        f"(premise 0.01), worst per-plane foreground-mean Dice = {worst_fg:.4f} "
        f"(gate 0.90), step-image Dice per label = {step_dice}"
    )
    assert min_cov >= 0.01
    assert worst_fg >= 0.90
    assert step_dice == [1.0, 1.0]


def test_closing_benefit_direction():
    deltas = []
    for fold_seed in range(4):
        spec = PhantomSpec(rng_seed=fold_seed)  # default spec has gray-texture holes
        gray, truth = generate_phantom(spec)
        scribbles = generate_scribbles(
            truth, z_stride=10, strokes_per_label=14, stroke_len=10,
            rng_seed=fold_seed, allocation="area",
        )
        normalized = normalize_intensities(gray)
        raw = np.full(spec.dims, UNLABELED, dtype=np.uint8)
        closed = np.full(spec.dims, UNLABELED, dtype=np.uint8)
        for z in scribbles.planes():
            plane = propagate_slice(normalized.data[z], scribbles.for_plane(z), CFG)
            raw[z] = plane
            closed[z] = close_bone_label(plane, DISK2)
        reference = mask_labels_to_planes(truth, scribbles.planes())
        raw_report = dice_report(LabelVolume.from_array(raw), reference)
        closed_report = dice_report(LabelVolume.from_array(closed), reference)
        deltas.append(closed_report.per_label[1] - raw_report.per_label[1])
    ok = all(d >= 0 for d in deltas)
    print(
        f"[{_status(ok)}] closing benefit: bone Dice delta (closed - raw) per fold = "
        + ", ".join(f"{d:+.5f}" for d in deltas)
        + " (gate >= 0 on every fold)"
    )
    assert ok


def test_reference_table_totals():
    # the total column must be the plain mean of the three foreground columns;
    # check the implementation's aggregate against every published row at 5e-4
    failures = []
    for name, published_total, bone, corroded, screw in REFERENCE_CV_ROWS:
        report = DiceReport(
            per_label={1: bone, 2: corroded, 3: screw},
            total=(bone + corroded + screw) / 3,
            ref_voxels={1: 0, 2: 0, 3: 0},
            pred_voxels={1: 0, 2: 0, 3: 0},
        )
        deviation = abs(report.total - published_total)
        row_ok = deviation <= 5e-4
        print(
            f"[{_status(row_ok)}] reference-table row {name}: mean of per-class "
            f"values {report.total:.6f} vs published total {published_total:.3f} "
            f"(|diff| = {deviation:.6f}, gate 5e-4)"
        )
        if not row_ok:
            failures.append((name, deviation))
    ok = not failures
    print(
        f"[{_status(ok)}] reference-table arithmetic: {5 - len(failures)}/5 rows "
        f"within 5e-4"
        + (
            "; inconsistent published rounding in: "
            + ", ".join(name for name, _ in failures)
            if failures
            else ""
        )
    )
    assert not failures, (
        "published totals inconsistent with published per-class values "
        f"beyond 5e-4: {failures}"
    )


def test_morphology_property_suite():
    start = time.perf_counter()
    radius = 1
    disk = StructuringElement("disk", radius)
    extensive = idempotent = monotone = dual = True
    masks = []
    for bits in range(512):
        masks.append(
            np.array([(bits >> k) & 1 for k in range(9)], dtype=bool).reshape(3, 3)
        )
    for mask in masks:
        closed = close_mask(mask, disk)
        extensive &= not (mask & ~closed).any()
        idempotent &= bool(np.array_equal(close_mask(closed, disk), closed))
        comp = ~mask
        padded = np.pad(comp, radius, constant_values=True)
        matched_erosion = erode(padded, disk)[radius:-radius, radius:-radius]
        dual &= bool(np.array_equal(dilate(mask, disk), ~matched_erosion))
    rng = np.random.default_rng(11)
    for _ in range(200):
        a = masks[rng.integers(512)]
        b = masks[rng.integers(512)]
        monotone &= not (close_mask(a & b, disk) & ~close_mask(a | b, disk)).any()
    elapsed = time.perf_counter() - start
    ok = extensive and idempotent and monotone and dual and elapsed < 1.0
    print(
        f"[{_status(ok)}] morphology properties over all 512 3x3 masks: "
        f"extensive={extensive} idempotent={idempotent} monotone={monotone} "
        f"duality={dual}, runtime {elapsed:.3f}s (gate 1s)"
    )
    assert extensive and idempotent and monotone and dual
    assert elapsed < 1.0
