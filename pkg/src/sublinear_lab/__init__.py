"""Sublinear expectations on finite credal sets and sample-mean inequalities."""
