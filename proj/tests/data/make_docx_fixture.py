#!/usr/bin/env python3
"""Writes the docx fixtures with python-docx.

two_headings.docx: 2 headings, 3 body paragraphs.
no_headings.docx: 2 body paragraphs and a table caption, no heading styles.
"""
import sys
from pathlib import Path

from docx import Document

out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).parent

doc = Document()
doc.add_heading("4.1 General", level=1)
doc.add_paragraph("The PCRF provides policy control decisions.")
doc.add_paragraph("The PCEF enforces those decisions on service data flows.")
doc.add_heading("4.2 Reporting", level=1)
doc.add_paragraph("Usage is reported per rating group.")
doc.save(out_dir / "two_headings.docx")

doc = Document()
doc.add_paragraph("Plain opening paragraph.")
doc.add_paragraph("Table 2: Parameters")
p = doc.add_paragraph("Second ")
p.add_run("paragraph").bold = True
p.add_run(" in runs.")
doc.save(out_dir / "no_headings.docx")
