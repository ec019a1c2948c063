"""Controllers package"""
