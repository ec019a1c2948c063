"""Processing package"""
