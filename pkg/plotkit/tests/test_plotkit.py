import json
import os

import pytest

from synthetic_run import write_synthetic_run
from plotkit import BundleError, FigureBundle, render_three_panel
from plotkit.cli import main

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("mode", ["ga-max", "ga-min", "oct-max", "oct-min"])
def test_renders_headline_run(headline_runs, tmp_path, mode):
    out = str(tmp_path / f"{mode}.png")
    bundle = FigureBundle.from_directory(headline_runs[mode], out)
    assert render_three_panel(bundle) == out
    with open(out, "rb") as fh:
        assert fh.read(8) == PNG_MAGIC


class TestProvenance:
    def test_refuses_mixed_runs(self, tmp_path):
        a = write_synthetic_run(str(tmp_path / "a"), config_hash="run-a")
        b = write_synthetic_run(str(tmp_path / "b"), config_hash="run-b")
        bundle = FigureBundle(
            field_csv=os.path.join(a, "field.csv"),
            trajectory_csv=os.path.join(b, "trajectory.csv"),
            output=str(tmp_path / "x.png"))
        with pytest.raises(BundleError, match="mix"):
            render_three_panel(bundle)

    def test_refuses_missing_manifest(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"))
        os.remove(os.path.join(run, "manifest.json"))
        bundle = FigureBundle.from_directory(run, str(tmp_path / "x.png"))
        with pytest.raises(BundleError, match="manifest"):
            render_three_panel(bundle)

    def test_missing_columns_are_listed(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"))
        with open(os.path.join(run, "trajectory.csv"), "w") as fh:
            fh.write("t_fs,P_trans\n0,1\n1,1\n")
        bundle = FigureBundle.from_directory(run, str(tmp_path / "x.png"))
        with pytest.raises(BundleError, match=r"P_cis.*P_e"):
            render_three_panel(bundle)


class TestRendering:
    def test_pixel_deterministic(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"))
        outs = []
        for name in ("one.png", "two.png"):
            out = str(tmp_path / name)
            render_three_panel(FigureBundle.from_directory(run, out))
            outs.append(open(out, "rb").read())
        assert outs[0] == outs[1]

    def test_missing_spectrogram_renders_placeholder(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"), with_spectrogram=False)
        out = str(tmp_path / "x.png")
        bundle = FigureBundle.from_directory(run, out)
        assert bundle.spectrogram_csv is None
        render_three_panel(bundle)
        assert os.path.exists(out)

    def test_unknown_style_key_rejected(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"))
        bundle = FigureBundle.from_directory(run, str(tmp_path / "x.png"),
                                             style={"color": "red"})
        with pytest.raises(BundleError, match="style"):
            render_three_panel(bundle)

    def test_style_controls_output(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"))
        sizes = []
        for dpi in (72, 150):
            out = str(tmp_path / f"{dpi}.png")
            render_three_panel(FigureBundle.from_directory(
                run, out, style={"dpi": dpi}))
            sizes.append(os.path.getsize(out))
        assert sizes[0] != sizes[1]


class TestCli:
    def test_success(self, tmp_path, capsys):
        run = write_synthetic_run(str(tmp_path / "r"))
        out = str(tmp_path / "fig.png")
        assert main([run, out]) == 0
        assert os.path.exists(out)
        assert "wrote" in capsys.readouterr().out

    def test_cli_deterministic_across_invocations(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"))
        a, b = str(tmp_path / "a.png"), str(tmp_path / "b.png")
        assert main([run, a]) == 0
        assert main([run, b]) == 0
        assert open(a, "rb").read() == open(b, "rb").read()

    def test_style_file(self, tmp_path):
        run = write_synthetic_run(str(tmp_path / "r"))
        style = tmp_path / "style.json"
        style.write_text(json.dumps({"time_unit": "fs", "dpi": 80}))
        assert main([run, str(tmp_path / "f.png"),
                     "--style", str(style)]) == 0

    def test_bad_style_file(self, tmp_path, capsys):
        run = write_synthetic_run(str(tmp_path / "r"))
        assert main([run, str(tmp_path / "f.png"),
                     "--style", str(tmp_path / "nope.json")]) == 2

    def test_error_exit_code(self, tmp_path, capsys):
        run = write_synthetic_run(str(tmp_path / "r"))
        os.remove(os.path.join(run, "manifest.json"))
        assert main([run, str(tmp_path / "f.png")]) == 2
        assert "manifest" in capsys.readouterr().err
