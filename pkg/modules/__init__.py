"""Modules: écriture des résultats"""
