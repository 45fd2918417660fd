#!/usr/bin/env python3
"""
test_module_headers.py

Every library module opens with the interpreter line and a docstring naming
the file and its licence.
"""

import ast
import unittest
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
PACKAGES = ("libs", "tools", "pipelines")


def library_modules():
    for package in PACKAGES:
        for path in sorted((ROOT / package).glob("*.py")):
            if path.name != "__init__.py":
                yield path


class TestModuleHeaders(unittest.TestCase):
    def test_modules_found(self):
        self.assertIn("errors.py", {p.name for p in library_modules()})

    def test_headers(self):
        for path in library_modules():
            with self.subTest(module=f"{path.parent.name}/{path.name}"):
                text = path.read_text()
                self.assertTrue(text.startswith("#!/usr/bin/env python3\n"))
                doc = ast.get_docstring(ast.parse(text)) or ""
                self.assertEqual(doc.splitlines()[0] if doc else "", path.name)
                self.assertIn("License: GPL-3.0", doc)


if __name__ == "__main__":
    unittest.main()
