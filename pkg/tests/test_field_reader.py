#!/usr/bin/env python3
"""
test_field_reader.py

Tests for field tables and weighted point files.
"""

import tempfile
import unittest
from pathlib import Path

import numpy as np

from helpers import random_points, write_text
from libs.errors import FieldFormatError, MeshFormatError
from tools.field_reader import FieldTable, read_fields, read_point_set, write_fields, write_point_set


class TestFieldTables(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def test_read_all_columns(self):
        text = (
            "# index A Cx Cy Cz k1 k2\n"
            "0 0.5 1 0 0 1.0 -1.0\n"
            "1 0.25 0 2 0 0.5 -0.5\n"
        )
        table = read_fields(write_text(self.dir, "f.txt", text), n_vertices=2)
        np.testing.assert_allclose(table.area, [0.5, 0.25])
        # the second direction is renormalized
        np.testing.assert_allclose(table.direction, [[1, 0, 0], [0, 1, 0]])
        np.testing.assert_allclose(table.k1, [1.0, 0.5])
        np.testing.assert_allclose(table.k2, [-1.0, -0.5])
        self.assertEqual(table.columns, ["A", "Cx", "Cy", "Cz", "k1", "k2"])
        self.assertEqual(len(table), 2)

    def test_rows_may_come_in_any_order(self):
        table = read_fields(write_text(self.dir, "f.txt", "index A\n1 2.0\n0 1.0\n"))
        np.testing.assert_allclose(table.area, [1.0, 2.0])
        self.assertIsNone(table.direction)

    def test_write_then_read(self):
        table = FieldTable(area=np.array([0.1, 0.2, 0.3]), direction=np.eye(3))
        path = Path(self.dir) / "out.txt"
        write_fields(path, table)
        back = read_fields(path)
        np.testing.assert_array_equal(back.area, table.area)
        np.testing.assert_array_equal(back.direction, table.direction)

    def test_header_must_start_with_index(self):
        with self.assertRaises(FieldFormatError):
            read_fields(write_text(self.dir, "f.txt", "A index\n0 1.0\n"))

    def test_partial_direction_is_rejected(self):
        with self.assertRaises(FieldFormatError):
            read_fields(write_text(self.dir, "f.txt", "index Cx\n0 1.0\n"))

    def test_single_curvature_is_rejected(self):
        with self.assertRaises(FieldFormatError):
            read_fields(write_text(self.dir, "f.txt", "index k1\n0 1.0\n"))

    def test_count_mismatch(self):
        with self.assertRaises(FieldFormatError):
            read_fields(write_text(self.dir, "f.txt", "index A\n0 1.0\n1 1.0\n"), n_vertices=3)

    def test_indices_must_cover_every_vertex(self):
        with self.assertRaises(FieldFormatError):
            read_fields(write_text(self.dir, "f.txt", "index A\n0 1.0\n2 1.0\n"))

    def test_repeated_index_reports_its_line(self):
        with self.assertRaises(FieldFormatError) as ctx:
            read_fields(write_text(self.dir, "f.txt", "index A\n0 1.0\n0 2.0\n"))
        self.assertEqual(ctx.exception.line_number, 3)

    def test_zero_direction(self):
        with self.assertRaises(FieldFormatError):
            read_fields(write_text(self.dir, "f.txt", "index Cx Cy Cz\n0 0 0 0\n"))


class TestPointFiles(unittest.TestCase):
    def setUp(self):
        self._tmp = tempfile.TemporaryDirectory()
        self.dir = self._tmp.name

    def tearDown(self):
        self._tmp.cleanup()

    def test_two_and_three_columns(self):
        text = "# x y w\n0 0 0.1\n1 0   # unweighted\n\n0 1 0.2\n"
        ps = read_point_set(write_text(self.dir, "p.txt", text))
        np.testing.assert_allclose(ps.positions, [[0, 0], [1, 0], [0, 1]])
        np.testing.assert_allclose(ps.weights, [0.1, 0.0, 0.2])

    def test_write_then_read(self):
        ps = random_points(6, seed=11)
        path = Path(self.dir) / "p.txt"
        write_point_set(path, ps)
        back = read_point_set(path)
        np.testing.assert_array_equal(back.positions, ps.positions)
        np.testing.assert_array_equal(back.weights, ps.weights)

    def test_malformed_rows(self):
        with self.assertRaises(MeshFormatError) as ctx:
            read_point_set(write_text(self.dir, "p.txt", "0 0\n1 2 3 4\n"))
        self.assertEqual(ctx.exception.line_number, 2)
        with self.assertRaises(MeshFormatError):
            read_point_set(write_text(self.dir, "q.txt", "# nothing\n"))


if __name__ == "__main__":
    unittest.main()
