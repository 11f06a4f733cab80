"""Core: paramètres et accès fichiers"""
