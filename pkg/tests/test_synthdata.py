import numpy as np
import pytest

from chromaflow.errors import ClipLoadError, ValidationError
from chromaflow.flowwarp import warp_backward
from chromaflow.synthdata import (
    SynthSpec,
    VideoClip,
    generate_clip,
    load_clip,
    make_training_batch,
    save_clip,
)

TRANSLATE_2_0 = ((np.eye(2), (2.0, 0.0)),)


def _spec(**kwargs):
    base = dict(n_frames=8, resolution=(96, 128), n_objects=2, seed=1)
    base.update(kwargs)
    return SynthSpec(**base)


def test_empty_scene_is_static():
    clip = generate_clip(_spec(n_objects=0))
    for flow in clip.flows_forward:
        assert not flow.any()
    for seg in clip.seg_maps:
        assert not seg.any()
    for t in range(1, clip.n_frames):
        np.testing.assert_array_equal(clip.gray(t), clip.gray(0))


def test_translation_flow_exact_inside_footprint():
    clip = generate_clip(_spec(n_objects=1, motion_overrides=TRANSLATE_2_0))
    for t in range(clip.n_frames - 1):
        inside = clip.seg_maps[t] > 0.5
        assert inside.any()
        assert np.array_equal(clip.flows_forward[t][inside][:, 0], np.full(inside.sum(), 2.0))
        assert np.array_equal(clip.flows_forward[t][inside][:, 1], np.zeros(inside.sum()))


def test_generation_is_deterministic():
    a = generate_clip(_spec(seed=42))
    b = generate_clip(_spec(seed=42))
    for t in range(a.n_frames):
        np.testing.assert_array_equal(a.gray(t), b.gray(t))
        np.testing.assert_array_equal(a.ab(t), b.ab(t))
        np.testing.assert_array_equal(a.seg_maps[t], b.seg_maps[t])
    for fa, fb in zip(a.flows_forward, b.flows_forward):
        np.testing.assert_array_equal(fa, fb)


def test_seg_maps_are_binary():
    clip = generate_clip(_spec(motion_model="rotation"))
    for seg in clip.seg_maps:
        assert set(np.unique(seg)) <= {0.0, 1.0}


def test_resolution_must_be_divisible_by_32():
    with pytest.raises(ValidationError):
        generate_clip(_spec(resolution=(100, 128)))


def test_save_load_round_trip(tmp_path):
    clip = generate_clip(_spec(n_frames=4))
    save_clip(clip, tmp_path)
    loaded = load_clip(tmp_path)
    assert loaded.n_frames == clip.n_frames
    for fa, fb in zip(clip.flows_forward, loaded.flows_forward):
        np.testing.assert_array_equal(fa, fb)  # raw float32 is lossless
    for t in range(clip.n_frames):
        assert np.abs(loaded.gray(t) - clip.gray(t)).max() <= 1.0 / 255.0
        assert np.abs(loaded.ab(t) - clip.ab(t)).max() <= 1.0 / 255.0
        assert np.abs(loaded.seg_maps[t] - clip.seg_maps[t]).max() <= 1.0 / 255.0


def test_load_without_flow_files(tmp_path):
    clip = generate_clip(_spec(n_frames=3))
    save_clip(clip, tmp_path)
    for f in tmp_path.glob("flow_*.svcf"):
        f.unlink()
    loaded = load_clip(tmp_path)
    assert loaded.flows_forward is None
    assert loaded.n_frames == 3


def test_load_missing_frame_names_file(tmp_path):
    clip = generate_clip(_spec(n_frames=4))
    save_clip(clip, tmp_path)
    (tmp_path / "frame_00002.png").unlink()
    with pytest.raises(ClipLoadError, match="frame_00002.png"):
        load_clip(tmp_path)


# ---------------------------------------------------------------------------
# training batches
# ---------------------------------------------------------------------------

def _first7(clip):
    return VideoClip(
        frames=clip.frames[:7],
        seg_maps=clip.seg_maps[:7],
        flows_forward=clip.flows_forward[:6],
    )


def test_batch_shape_and_junction():
    clip = _first7(generate_clip(_spec(n_frames=7)))
    batch = make_training_batch(clip, np.random.default_rng(0))
    assert batch.n_frames == 13
    assert len(batch.flows_forward) == 12
    # with exactly 7 input frames the window starts at 0: frame 6 is input frame 0
    np.testing.assert_array_equal(batch.gray(6), clip.gray(0))
    np.testing.assert_array_equal(batch.gray(5), clip.gray(0)[:, ::-1])
    np.testing.assert_array_equal(batch.gray(0), clip.gray(5)[:, ::-1])
    np.testing.assert_array_equal(batch.gray(12), clip.gray(6))


def test_batch_junction_flow_is_exact_mirror():
    clip = _first7(generate_clip(_spec(n_frames=7)))
    batch = make_training_batch(clip, np.random.default_rng(0))
    warped = warp_backward(batch.gray(6), batch.flows_forward[5])
    np.testing.assert_array_equal(warped, batch.gray(5))


def test_batch_mirrored_flows_match_rederived_motion():
    # one object translating by (u, v): in the mirrored reversed prefix the
    # object must move by exactly (u, -v) per step
    clip = _first7(
        generate_clip(_spec(n_frames=7, n_objects=1, motion_overrides=((np.eye(2), (2.0, 1.0)),)))
    )
    batch = make_training_batch(clip, np.random.default_rng(0))
    for k in range(5):
        # erode the footprint: flow inversion is ill-posed in the 2-3 px
        # occlusion band at the leading/trailing edges
        interior = batch.seg_maps[k] > 0.5
        for _ in range(4):
            interior[1:] &= interior[:-1]
            interior[:-1] &= interior[1:]
            interior[:, 1:] &= interior[:, :-1]
            interior[:, :-1] &= interior[:, 1:]
        assert interior.sum() > 100
        flow = batch.flows_forward[k][interior]
        np.testing.assert_allclose(flow[:, 0], 2.0, atol=1e-5)
        np.testing.assert_allclose(flow[:, 1], -1.0, atol=1e-5)
        # brute-force: the flow must actually align consecutive prefix frames
        warped = warp_backward(batch.gray(k + 1), batch.flows_forward[k])
        assert np.abs(warped - batch.gray(k))[interior].max() < 2.0 / 255.0


def test_batch_requires_seven_frames():
    clip = generate_clip(_spec(n_frames=6))
    with pytest.raises(ValidationError):
        make_training_batch(clip, np.random.default_rng(0))
