# Copyright (c) 2026, Mansy and contributors
# For license information, please see license.txt
