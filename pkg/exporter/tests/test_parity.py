"""Cross-engine parity: torch forward passes vs the primary engine loaded
with exported weights, through the primary's own CLI and file formats."""

import numpy as np
import pytest

from featreg_exporter.export import export_descriptors, export_weights, map_network, run_to_tap
from featreg_exporter.models import build_model
from featreg_exporter.patches import match_channels
from featreg_exporter.pnm import read_image, write_pgm
from cliutil import parse_kpd, rel_error, run_featreg

PARITY_RTOL = 1e-4


def centered_keypoint_line(side: int) -> str:
    # window == image side centred on ((side-1)/2, (side-1)/2) samples the
    # exact pixel grid, so both engines see identical network inputs
    c = (side - 1) / 2.0
    return f"{c} {c} 1.6 0 1\n"


def describe_with_primary(tmp_path, image, config, blob, window, tap=None):
    kpd = tmp_path / "primary.kpd"
    kps = tmp_path / "kps.txt"
    kps.write_text(centered_keypoint_line(window))
    args = [
        "describe", image, kps, "--backend", "cnn",
        "--net-config", config, "--weights", blob,
        "--window", str(window), "--no-normalize", "-o", kpd,
    ]
    if tap:
        args += ["--tap", tap]
    result = run_featreg(*args)
    assert result.returncode == 0, result.stderr
    return parse_kpd(kpd.read_bytes())


class TestTinynetParity:
    def test_fc_activations_match(self, tmp_path):
        export_weights("tinynet", "fc3", tmp_path / "t.netcfg", tmp_path / "t.w32", seed=0)
        rng = np.random.default_rng(7)
        image = tmp_path / "img.pgm"
        image.write_bytes(write_pgm(rng.uniform(0, 1, (16, 16)), maxval=65535))

        _, primary = describe_with_primary(
            tmp_path, image, tmp_path / "t.netcfg", tmp_path / "t.w32", window=16
        )
        assert primary.shape == (1, 32)

        mapped = map_network(build_model("tinynet", seed=0), "fc3")
        pixels = match_channels(read_image(image.read_bytes()), 1)
        reference = run_to_tap(mapped, pixels)
        assert rel_error(primary[0], reference) < PARITY_RTOL


class TestExportDescriptors:
    def make_fixture(self, tmp_path, side=16, n_extra=2, seed=11):
        rng = np.random.default_rng(seed)
        images = tmp_path / "images"
        keypoints = tmp_path / "keypoints"
        images.mkdir()
        keypoints.mkdir()
        image = images / "fix.pgm"
        image.write_bytes(write_pgm(rng.uniform(0, 1, (48, 48)), maxval=65535))
        # interior keypoints at two scales plus one that must drop out
        lines = [
            "23.5 23.5 1.6 0 1",
            "20 25 3.2 1 0.5",   # effective window 32: still inside
            "2 2 1.6 0 0.25",    # window exits the frame -> dropped
        ]
        (keypoints / "fix.txt").write_text("\n".join(lines) + "\n")
        return images, keypoints

    def test_empty_dump_gives_empty_kpd(self, tmp_path):
        images, keypoints = self.make_fixture(tmp_path)
        (keypoints / "fix.txt").write_text("")
        out = tmp_path / "out"
        written = export_descriptors("tinynet", "fc3", images, keypoints, out,
                                     window=16, seed=0)
        assert [p.name for p in written] == ["fix.kpd"]
        text = written[0].read_bytes().decode()
        assert text.splitlines()[1] == "0 32"

    def test_row_count_is_surviving_keypoints(self, tmp_path):
        images, keypoints = self.make_fixture(tmp_path)
        out = tmp_path / "out"
        written = export_descriptors("tinynet", "fc3", images, keypoints, out,
                                     window=16, seed=0)
        kps, vectors = parse_kpd(written[0].read_bytes())
        assert len(kps) == 2  # third keypoint's window exits the image
        assert vectors.shape == (2, 32)

    def test_descriptors_match_primary_engine(self, tmp_path):
        images, keypoints = self.make_fixture(tmp_path)
        export_weights("tinynet", "fc3", tmp_path / "t.netcfg", tmp_path / "t.w32", seed=0)
        out = tmp_path / "out"
        written = export_descriptors("tinynet", "fc3", images, keypoints, out,
                                     window=16, seed=0)
        _, reference = parse_kpd(written[0].read_bytes())

        kpd = tmp_path / "primary.kpd"
        result = run_featreg(
            "describe", images / "fix.pgm", keypoints / "fix.txt",
            "--backend", "cnn", "--net-config", tmp_path / "t.netcfg",
            "--weights", tmp_path / "t.w32", "--window", "16", "--no-normalize",
            "-o", kpd,
        )
        assert result.returncode == 0, result.stderr
        _, primary = parse_kpd(kpd.read_bytes())
        assert primary.shape == reference.shape
        for row in range(primary.shape[0]):
            assert rel_error(primary[row], reference[row]) < PARITY_RTOL


class TestAlexnetParity:
    def test_fc6_activations_match(self, tmp_path, alexnet_export):
        d, _ = alexnet_export
        rng = np.random.default_rng(8)
        image = tmp_path / "img.pgm"
        image.write_bytes(write_pgm(rng.uniform(0, 1, (224, 224)), maxval=65535))

        _, primary = describe_with_primary(
            tmp_path, image, d / "a.netcfg", d / "a.w32", window=224
        )
        assert primary.shape == (1, 4096)

        mapped = map_network(build_model("alexnet", seed=0), "fc6")
        pixels = match_channels(read_image(image.read_bytes()), 3)
        reference = run_to_tap(mapped, pixels)
        assert rel_error(primary[0], reference) < PARITY_RTOL
        assert float(np.abs(primary[0] - reference).max()) < PARITY_RTOL * float(
            np.abs(reference).max()
        )

    def test_fc7_tap_length(self, tmp_path, alexnet_export):
        d, _ = alexnet_export
        rng = np.random.default_rng(9)
        image = tmp_path / "img.pgm"
        image.write_bytes(write_pgm(rng.uniform(0, 1, (224, 224)), maxval=65535))
        _, primary = describe_with_primary(
            tmp_path, image, d / "a.netcfg", d / "a.w32", window=224, tap="fc7"
        )
        assert primary.shape == (1, 4096)

        mapped = map_network(build_model("alexnet", seed=0), "fc7")
        pixels = match_channels(read_image(image.read_bytes()), 3)
        reference = run_to_tap(mapped, pixels)
        assert rel_error(primary[0], reference) < PARITY_RTOL
