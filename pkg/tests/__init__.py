"""Test package"""


