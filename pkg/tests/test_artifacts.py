import json
import math
import unittest

import numpy as np

from driftlab.artifacts import *
from driftlab.drift import DriftField
from driftlab.exceptions import SchemaError
from driftlab.generator import MlpGenerator
from driftlab.targets import ParticleSet

from .utils import NumericTestCase, temp_dir


class FormatValueTests(unittest.TestCase):
    def test_format(self):
        for value, expected in [
            (True, "1"),
            (np.bool_(False), "0"),
            (3, "3"),
            (np.int64(-2), "-2"),
            (0.5, "0.5"),
            (0.1, "0.10000000000000001"),
            (math.inf, "inf"),
            (-math.inf, "-inf"),
            ("label", "label"),
        ]:
            with self.subTest(value=value):
                self.assertEqual(format_value(value), expected)

    def test_float_is_exact(self):
        value = 1 / 3
        self.assertEqual(float(format_value(value)), value)


class CsvTests(NumericTestCase):
    def test_write_read(self):
        with temp_dir() as directory:
            path = write_csv(
                directory / "table.csv", ["a", "b"], [(1, 0.25), (2, 1 / 3)]
            )
            self.assertEqual(path.read_text(), "a,b\n1,0.25\n2,0.33333333333333331\n")
            columns, values = read_csv(path)
        self.assertEqual(columns, ["a", "b"])
        self.assertArrayEqual(values, [[1.0, 0.25], [2.0, 1 / 3]])

    def test_header_only(self):
        with temp_dir() as directory:
            write_csv(directory / "empty.csv", ["a", "b"], [])
            columns, values = read_csv(directory / "empty.csv")
        self.assertEqual(columns, ["a", "b"])
        self.assertEqual(values.shape, (0, 2))

    def test_write_ragged(self):
        with temp_dir() as directory:
            with self.assertRaises(SchemaError):
                write_csv(directory / "table.csv", ["a", "b"], [(1,)])

    def test_read_errors(self):
        for text, message in [
            ("", "file is empty"),
            ("a,b\n1\n", "line 2: expected 2 values, got 1"),
            ("a\nx\n", "line 2: could not convert string to float: 'x'"),
        ]:
            with self.subTest(text=text):
                with temp_dir() as directory:
                    path = directory / "table.csv"
                    path.write_text(text)
                    with self.assertRaises(SchemaError) as raised:
                        read_csv(path)
                self.assertEqual(raised.exception.msg, message)

    def test_particles(self):
        particles = ParticleSet([[0.0, 1.0], [2.5, -3.0]])
        with temp_dir() as directory:
            path = write_particles(directory / "particles.csv", particles)
            self.assertEqual(path.read_text().splitlines()[0], "x,y")
            self.assertEqual(read_particles(path), particles)

    def test_particles_higher_dimension(self):
        particles = ParticleSet(np.eye(3))
        with temp_dir() as directory:
            path = write_particles(directory / "particles.csv", particles)
            self.assertEqual(path.read_text().splitlines()[0], "x0,x1,x2")

    def test_no_particles(self):
        with temp_dir() as directory:
            path = write_csv(directory / "particles.csv", ["x", "y"], [])
            with self.assertRaises(SchemaError):
                read_particles(path)

    def test_drift_field(self):
        field = DriftField(
            np.array([[0.0, 0.0], [1.0, 2.0]]),
            np.array([[0.5, -0.5], [0.0, 1.0]]),
            np.array([False, True]),
        )
        with temp_dir() as directory:
            path = write_drift_field(directory / "field.csv", field)
            columns, values = read_csv(path)
        self.assertEqual(columns, ["x", "y", "vx", "vy", "far"])
        self.assertArrayEqual(values[1], [1.0, 2.0, 0.0, 1.0, 1.0])

    def test_json(self):
        with temp_dir() as directory:
            path = write_json(directory / "data.json", {"b": 1, "a": [0.5]})
            text = path.read_text()
        self.assertTrue(text.endswith("}\n"))
        self.assertLess(text.index('"a"'), text.index('"b"'))
        self.assertEqual(json.loads(text), {"a": [0.5], "b": 1})


class CheckpointTests(NumericTestCase):
    def test_save_load(self):
        generator = MlpGenerator.init(2, 8, 3, seed=0)
        with temp_dir() as directory:
            path = save_checkpoint(
                directory / "model.bin", generator, seed=7, step=120
            )
            loaded, header = load_checkpoint(path)
        self.assertArrayEqual(loaded.flatten(), generator.flatten())
        self.assertEqual(loaded.dims, (2, 8, 3))
        self.assertEqual(header["seed"], 7)
        self.assertEqual(header["step"], 120)
        self.assertEqual(header["format"], "driftlab-mlp")

    def test_byte_identical(self):
        generator = MlpGenerator.init(2, 4, 2, seed=0)
        with temp_dir() as directory:
            first = save_checkpoint(directory / "a.bin", generator).read_bytes()
            second = save_checkpoint(directory / "b.bin", generator).read_bytes()
        self.assertEqual(first, second)

    def test_invalid(self):
        generator = MlpGenerator.init(2, 4, 2, seed=0)
        for name, mangle in [
            ("truncated", lambda data: data[:2]),
            ("header", lambda data: data[:4] + b"!" + data[5:]),
            ("parameters", lambda data: data[:-8]),
        ]:
            with self.subTest(name=name):
                with temp_dir() as directory:
                    path = save_checkpoint(directory / "model.bin", generator)
                    path.write_bytes(mangle(path.read_bytes()))
                    with self.assertRaises(SchemaError):
                        load_checkpoint(path)

    def test_not_a_checkpoint(self):
        header = json.dumps({"format": "other"}).encode()
        with temp_dir() as directory:
            path = directory / "model.bin"
            path.write_bytes(len(header).to_bytes(4, "little") + header)
            with self.assertRaises(SchemaError) as raised:
                load_checkpoint(path)
        self.assertEqual(raised.exception.msg, "not a generator checkpoint")
