"""Presentation Layer: CLI, journalisation et vues Rich"""
