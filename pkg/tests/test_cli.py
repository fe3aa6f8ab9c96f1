import numpy as np
import pytest

from flowseg import cli, media_io


@pytest.fixture(scope="module")
def segmented_dir(tmp_path_factory, square_sequence_dir):
    """Run segment once; several tests inspect its output."""
    spec_path, gt_dir, seq = square_sequence_dir
    out = tmp_path_factory.mktemp("cli_out")
    code = cli.run_cli(["segment", "--spec", str(spec_path), "--out", str(out)])
    assert code == 0
    return out, gt_dir, seq


class TestSegment:
    def test_writes_all_masks(self, segmented_dir):
        out, _, seq = segmented_dir
        files = sorted(out.glob("*.png"))
        assert len(files) == seq.n_frames
        first, n = media_io.load_mask(files[0])
        assert np.array_equal(first, seq.gt_masks[0])
        assert n == 2

    def test_overlay_flag(self, tmp_path, square_sequence_dir):
        spec_path, _, seq = square_sequence_dir
        out = tmp_path / "out"
        code = cli.run_cli(
            ["segment", "--spec", str(spec_path), "--out", str(out), "--overlay"]
        )
        assert code == 0
        assert len(list(out.glob("*_overlay.png"))) == seq.n_frames

    def test_missing_spec_is_input_error(self, tmp_path, capsys):
        code = cli.run_cli(
            ["segment", "--spec", str(tmp_path / "nope.cfg"), "--out", str(tmp_path)]
        )
        assert code == 1
        assert "input error" in capsys.readouterr().err


class TestEval:
    def test_perfect_prediction_reports_hundred(self, segmented_dir, capsys, tmp_path):
        _, gt_dir, _ = segmented_dir
        records = tmp_path / "records.csv"
        code = cli.run_cli(
            ["eval", "--pred", str(gt_dir), "--gt", str(gt_dir), "--records", str(records)]
        )
        assert code == 0
        out = capsys.readouterr().out
        assert "J: M=100.0 R=1.000 D=0.0" in out
        assert "F: M=100.0 R=1.000 D=0.0" in out
        lines = records.read_text().strip().splitlines()
        assert lines[0] == "sequence,frame,object,J,F"
        assert len(lines) == 1 + 5  # five evaluated frames, one object
        assert lines[1].endswith("1.000000,1.000000")

    def test_segmented_output_scores_high(self, segmented_dir, capsys):
        out, gt_dir, _ = segmented_dir
        code = cli.run_cli(["eval", "--pred", str(out), "--gt", str(gt_dir)])
        assert code == 0
        text = capsys.readouterr().out
        mean_j = float(text.split("J: M=")[1].split()[0])
        assert mean_j >= 95.0

    def test_empty_pred_dir_is_input_error(self, tmp_path, segmented_dir):
        _, gt_dir, _ = segmented_dir
        empty = tmp_path / "empty"
        empty.mkdir()
        assert cli.run_cli(["eval", "--pred", str(empty), "--gt", str(gt_dir)]) == 1


class TestAblate:
    def test_no_lor_toggle_runs(self, tmp_path, square_sequence_dir, capsys):
        spec_path, gt_dir, _ = square_sequence_dir
        out = tmp_path / "ablate_out"
        code = cli.run_cli(
            [
                "ablate",
                "--spec", str(spec_path),
                "--gt", str(gt_dir),
                "--out", str(out),
                "--no-lor",
            ]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "ablation: lor_enabled=False" in text
        assert "J: M=" in text

    def test_boundary_gradient_choice(self, tmp_path, square_sequence_dir, capsys):
        spec_path, gt_dir, _ = square_sequence_dir
        out = tmp_path / "ablate_out2"
        code = cli.run_cli(
            [
                "ablate",
                "--spec", str(spec_path),
                "--gt", str(gt_dir),
                "--out", str(out),
                "--no-fmag-fdir",
                "--boundary", "gradient",
            ]
        )
        assert code == 0
        text = capsys.readouterr().out
        assert "alpha=0.0" in text and "theta=0.0" in text


class TestAblateOcclusion:
    def test_removing_lor_lowers_mean_j(self, tmp_path_factory, capsys):
        from flowseg.synthetic import occlusion_square, write_sequence

        root = tmp_path_factory.mktemp("occ_seq")
        seq = occlusion_square(n_frames=8)
        spec_path = write_sequence(
            seq, root, config_lines=["lambda_mode = fixed(10)"], gt_dir=root / "gt"
        )

        def mean_j(args):
            assert cli.run_cli(args) == 0
            text = capsys.readouterr().out
            return float(text.split("J: M=")[1].split()[0])

        base = mean_j(
            ["ablate", "--spec", str(spec_path), "--gt", str(root / "gt"),
             "--out", str(root / "base")]
        )
        no_lor = mean_j(
            ["ablate", "--spec", str(spec_path), "--gt", str(root / "gt"),
             "--out", str(root / "nolor"), "--no-lor"]
        )
        assert no_lor < base


class TestSelectLambda:
    def test_prints_grid_value(self, square_sequence_dir, capsys):
        spec_path, _, _ = square_sequence_dir
        code = cli.run_cli(["select-lambda", "--spec", str(spec_path)])
        assert code == 0
        out = capsys.readouterr().out
        value = float(out.split("lambda =")[1])
        assert value in tuple(range(5, 61, 5))


class TestExitCodes:
    def test_unknown_flag(self, capsys):
        assert cli.run_cli(["segment", "--bogus"]) == 1
        assert "error" in capsys.readouterr().err

    def test_unknown_subcommand(self, capsys):
        assert cli.run_cli(["transmogrify"]) == 1

    def test_no_arguments(self, capsys):
        assert cli.run_cli([]) == 1

    def test_internal_error_is_exit_two(self, monkeypatch, tmp_path, square_sequence_dir, capsys):
        spec_path, _, _ = square_sequence_dir

        def boom(spec):
            raise RuntimeError("synthetic bug")

        monkeypatch.setattr(cli.pipeline, "segment_sequence", boom)
        code = cli.run_cli(
            ["segment", "--spec", str(spec_path), "--out", str(tmp_path / "x")]
        )
        assert code == 2
        assert "internal error" in capsys.readouterr().err
