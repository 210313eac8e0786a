import textwrap

from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from typegtr.source import (
    PLACEHOLDER,
    PythonFunction,
    TypeSlot,
    VarKind,
    enumerate_slots,
    extract_functions,
    insert_placeholder,
    mask_annotations,
    whitespace_normalize,
)


def fn(text: str, path: str = "mod.py") -> PythonFunction:
    text = textwrap.dedent(text).strip("\n")
    funcs, diags = extract_functions(text, path)
    assert diags == []
    assert len(funcs) == 1
    return funcs[0]


class TestExtractFunctions:
    def test_empty_file(self):
        assert extract_functions("", "empty.py") == ([], [])

    def test_two_top_level_functions(self):
        funcs, diags = extract_functions("def a(): ...\n\ndef b(): ...\n", "m.py")
        assert [f.name for f in funcs] == ["a", "b"]
        assert diags == []

    def test_method_level_and_nested(self):
        src = textwrap.dedent(
            """
            class C:
                def m(self):
                    def inner():
                        return 1
                    return inner
            def top():
                pass
            """
        )
        funcs, _ = extract_functions(src, "m.py")
        assert [f.name for f in funcs] == ["m", "top"]
        assert "def inner" in funcs[0].source_text  # nested stays embedded

    def test_malformed_function_recovered_around(self):
        src = "def good():\n    return 1\n\ndef broken(:\n    pass\n\ndef also_good():\n    return 2\n"
        funcs, diags = extract_functions(src, "m.py")
        assert [f.name for f in funcs] == ["good", "also_good"]
        assert len(diags) == 1
        assert diags[0].file_path == "m.py"

    def test_line_spans_one_based_inclusive(self):
        funcs, _ = extract_functions("x = 1\ndef f():\n    return x\n", "m.py")
        assert funcs[0].line_span == (2, 3)

    def test_decorators_excluded_from_text(self):
        funcs, _ = extract_functions("@deco\ndef f():\n    pass\n", "m.py")
        assert funcs[0].source_text.startswith("def f")

    @given(st.text(max_size=300))
    @settings(max_examples=200, suppress_health_check=[HealthCheck.too_slow], deadline=None)
    def test_never_raises_on_arbitrary_text(self, text):
        funcs, diags = extract_functions(text, "fuzz.py")
        assert isinstance(funcs, list)
        assert isinstance(diags, list)


class TestEnumerateSlots:
    def test_bare_function_has_only_ret(self):
        assert enumerate_slots(fn("def f(): pass")) == [TypeSlot(VarKind.RET)]

    def test_self_excluded(self):
        f = fn(
            """
            class C:
                def f(self, key):
                    return key
            """
        )
        assert enumerate_slots(f) == [TypeSlot(VarKind.ARG, "key"), TypeSlot(VarKind.RET)]

    def test_rebound_local_counted_once_at_first_binding(self):
        f = fn(
            """
            def f(a):
                x = a
                x = a
                return x
            """
        )
        assert enumerate_slots(f) == [
            TypeSlot(VarKind.ARG, "a"),
            TypeSlot(VarKind.LOCAL, "x", 0),
            TypeSlot(VarKind.RET),
        ]

    def test_order_args_locals_ret(self):
        f = fn(
            """
            def f(b, a):
                z = 1
                y = 2
                return y
            """
        )
        kinds = [(s.var_kind, s.var_name) for s in enumerate_slots(f)]
        assert kinds == [
            (VarKind.ARG, "b"),
            (VarKind.ARG, "a"),
            (VarKind.LOCAL, "z"),
            (VarKind.LOCAL, "y"),
            (VarKind.RET, ""),
        ]

    def test_tuple_targets_and_for_loops_not_slots(self):
        f = fn(
            """
            def f(items):
                a, b = items
                for i in items:
                    pass
                with open(items) as fh:
                    pass
                return a
            """
        )
        assert enumerate_slots(f) == [TypeSlot(VarKind.ARG, "items"), TypeSlot(VarKind.RET)]

    def test_nested_def_locals_excluded(self):
        f = fn(
            """
            def f():
                def g():
                    inner_only = 1
                    return inner_only
                outer = g()
                return outer
            """
        )
        names = [s.var_name for s in enumerate_slots(f) if s.var_kind == VarKind.LOCAL]
        assert names == ["outer"]

    def test_conditional_branch_locals_seen(self):
        f = fn(
            """
            def f(a):
                if a:
                    x = 1
                else:
                    y = 2
                return a
            """
        )
        names = [s.var_name for s in enumerate_slots(f) if s.var_kind == VarKind.LOCAL]
        assert names == ["x", "y"]

    def test_deterministic(self):
        f = fn("def f(a, b):\n    c = a\n    return c")
        assert enumerate_slots(f) == enumerate_slots(f)


class TestInsertPlaceholder:
    def test_argument(self):
        f = fn("def f(key):\n    return key")
        out = insert_placeholder(f, TypeSlot(VarKind.ARG, "key"))
        assert out.function.source_text.splitlines()[0] == "def f(key: <TYPE>):"

    def test_return(self):
        f = fn("def f():\n    return 1")
        out = insert_placeholder(f, TypeSlot(VarKind.RET))
        assert out.function.source_text.splitlines()[0] == "def f() -> <TYPE>:"

    def test_local(self):
        f = fn("def f():\n    x = 1\n    return x")
        out = insert_placeholder(f, TypeSlot(VarKind.LOCAL, "x"))
        assert "x: <TYPE> = 1" in out.function.source_text

    def test_exactly_one_placeholder_and_rest_identical(self):
        f = fn("def f(a, b):\n    return a + b")
        out = insert_placeholder(f, TypeSlot(VarKind.ARG, "b"))
        text = out.function.source_text
        assert text.count(PLACEHOLDER) == 1
        assert text.replace(": <TYPE>", "") == f.source_text

    def test_replaces_existing_annotation(self):
        f = fn("def f(key: int):\n    return key")
        out = insert_placeholder(f, TypeSlot(VarKind.ARG, "key"))
        assert "def f(key: <TYPE>):" in out.function.source_text

    def test_missing_slot_raises(self):
        import pytest

        from typegtr.source import SlotNotFound

        f = fn("def f(): pass")
        with pytest.raises(SlotNotFound):
            insert_placeholder(f, TypeSlot(VarKind.ARG, "nope"))

    def test_default_value_preserved(self):
        f = fn("def f(x=3):\n    return x")
        out = insert_placeholder(f, TypeSlot(VarKind.ARG, "x"))
        assert "def f(x: <TYPE>=3):" in out.function.source_text

    def test_method_indentation_preserved(self):
        f = fn(
            """
            class C:
                def m(self, key):
                    return key
            """
        )
        out = insert_placeholder(f, TypeSlot(VarKind.ARG, "key"))
        assert out.function.source_text.startswith("    def m(self, key: <TYPE>):")


class TestMaskAnnotations:
    def test_single_argument_annotation(self):
        f = fn("def f(key: IDMapKey):\n    return key")
        pairs = mask_annotations(f)
        assert len(pairs) == 1
        assert pairs[0].expected_type == "IDMapKey"
        assert "def f(key: <TYPE>):" in pairs[0].input.function.source_text

    def test_no_annotations(self):
        assert mask_annotations(fn("def f(a):\n    return a")) == []

    def test_three_annotations_three_pairs(self):
        f = fn(
            """
            def f(a: int, b) -> str:
                c: List[int] = [a]
                return "x"
            """
        )
        pairs = mask_annotations(f)
        assert len(pairs) == 3
        for pair in pairs:
            assert pair.input.function.source_text.count(PLACEHOLDER) == 1
        assert [p.expected_type for p in pairs] == ["int", "List[int]", "str"]
        assert [p.category for p in pairs] == ["elementary", "generic", "elementary"]

    def test_multiline_annotation_normalized(self):
        f = fn(
            """
            def f(
                a: Dict[str,
                        int],
            ):
                return a
            """
        )
        pairs = mask_annotations(f)
        assert pairs[0].expected_type == "Dict[str, int]"

    def test_round_trip(self):
        f = fn(
            """
            def f(a: int, b: "IDMap") -> Optional[str]:
                c: Dict[str, List[int]] = {}
                return None
            """
        )
        pairs = mask_annotations(f)
        assert len(pairs) == 4
        for pair in pairs:
            restored = pair.input.function.source_text.replace(
                PLACEHOLDER, pair.expected_type, 1
            )
            assert whitespace_normalize(restored) == whitespace_normalize(f.source_text)

    def test_later_rebinding_annotation_gets_occurrence_index(self):
        f = fn(
            """
            def f():
                x = 1
                x: int = 2
                return x
            """
        )
        pairs = mask_annotations(f)
        assert len(pairs) == 1
        assert pairs[0].input.slot == TypeSlot(VarKind.LOCAL, "x", 1)

    def test_unparseable_annotation_skipped(self):
        f = fn("def f(a: some_call()):\n    return a")
        assert mask_annotations(f) == []
