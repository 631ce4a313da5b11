import numpy as np
import pytest

from trojscan.dataset import example_filename, load_examples_dir, save_examples_dir
from trojscan.errors import ConfigError, ImageIOError
from trojscan.imaging import ExampleSet, save_png, to_uint8

from conftest import stripe_examples


def test_round_trip(tmp_path):
    examples = stripe_examples(seed=71, class_count=3, per_class=2, dims=(16, 16))
    save_examples_dir(examples, tmp_path)
    back = load_examples_dir(tmp_path)
    assert back.per_class_counts() == {0: 2, 1: 2, 2: 2}
    for n in range(3):
        for a, b in zip(examples.by_class[n], back.by_class[n]):
            assert np.array_equal(to_uint8(a), to_uint8(b))


def test_example_ordering(tmp_path):
    # indices in the filename, not directory order, decide example order
    imgs = [np.full((4, 4, 3), v) for v in (0.1, 0.5, 0.9)]
    for m, img in [(2, imgs[2]), (0, imgs[0]), (1, imgs[1])]:
        save_png(img, tmp_path / example_filename(0, m))
    loaded = load_examples_dir(tmp_path)
    assert [round(float(img[0, 0, 0]), 1) for img in loaded.by_class[0]] == [0.1, 0.5, 0.9]


def test_empty_dir_rejected(tmp_path):
    with pytest.raises(ConfigError, match="no class_"):
        load_examples_dir(tmp_path)


def test_missing_dir_rejected(tmp_path):
    with pytest.raises(ConfigError, match="does not exist"):
        load_examples_dir(tmp_path / "nope")


def test_non_contiguous_classes_rejected(tmp_path):
    save_png(np.zeros((4, 4, 3)), tmp_path / example_filename(0, 0))
    save_png(np.zeros((4, 4, 3)), tmp_path / example_filename(2, 0))
    with pytest.raises(ConfigError, match="not contiguous"):
        load_examples_dir(tmp_path)


def test_unreadable_image_error_names_file(tmp_path):
    path = tmp_path / example_filename(0, 0)
    path.write_bytes(b"this is not a png")
    with pytest.raises(ImageIOError, match="class_0_example_0.png"):
        load_examples_dir(tmp_path)


def test_unrelated_files_ignored(tmp_path):
    save_png(np.zeros((4, 4, 3)), tmp_path / example_filename(0, 0))
    (tmp_path / "notes.txt").write_text("ignore me")
    (tmp_path / "class_bad_example_x.png").write_bytes(b"junk")
    loaded = load_examples_dir(tmp_path)
    assert loaded.per_class_counts() == {0: 1}


def test_example_set_helpers():
    examples = ExampleSet(by_class={1: [np.zeros((2, 2, 3))], 0: [np.zeros((2, 2, 3))] * 2})
    assert examples.classes() == [0, 1]
    assert examples.total() == 3
