use super::{integer_exponent, BinaryOp, Expr, Node, UnaryOp};

pub(super) fn derivative(e: &Expr, index: usize) -> Expr {
    match e.node() {
        Node::Const(_) => Expr::zero(),
        Node::Var { index: i, .. } => {
            if *i == index {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Unary(op, u) => {
            let du = derivative(u, index);
            if du.is_zero() {
                return Expr::zero();
            }
            let outer = match op {
                UnaryOp::Neg => return -du,
                UnaryOp::Sin => u.clone().cos(),
                UnaryOp::Cos => -u.clone().sin(),
                UnaryOp::Tan => Expr::one() / Expr::pow(u.clone().cos(), 2.0),
                UnaryOp::Exp => e.clone(),
                UnaryOp::Log => return du / u.clone(),
                UnaryOp::Sqrt => return du / (Expr::constant(2.0) * e.clone()),
            };
            outer * du
        }
        Node::Binary(op, a, b) => {
            let da = derivative(a, index);
            let db = derivative(b, index);
            match op {
                BinaryOp::Add => da + db,
                BinaryOp::Sub => da - db,
                BinaryOp::Mul => &da * b + a * &db,
                BinaryOp::Div => {
                    if db.is_zero() {
                        da / b.clone()
                    } else {
                        (&da * b - a * &db) / Expr::pow(b.clone(), 2.0)
                    }
                }
            }
        }
        Node::Pow(base, p) => {
            let db = derivative(base, index);
            if db.is_zero() {
                return Expr::zero();
            }
            // integer exponents stay integer, so evaluation uses repeated multiplication
            let lowered = match integer_exponent(*p) {
                Some(n) => Expr::pow(base.clone(), f64::from(n - 1)),
                None => Expr::pow(base.clone(), p - 1.0),
            };
            Expr::constant(*p) * lowered * db
        }
    }
}

#[cfg(test)]
mod tests {
    use crate::expr::Chart;

    fn central(f: &crate::expr::Expr, x: &[f64], i: usize) -> f64 {
        let h = 1e-6;
        let mut p = x.to_vec();
        p[i] += h;
        let fp = f.eval(&p).unwrap();
        p[i] -= 2.0 * h;
        let fm = f.eval(&p).unwrap();
        (fp - fm) / (2.0 * h)
    }

    #[test]
    fn matches_finite_differences_on_every_rule() {
        let c = Chart::new(&["x", "y"]).unwrap();
        let cases = [
            "sin(x*y)",
            "cos(x)^3",
            "tan(x/4)",
            "exp(-x*y)",
            "log(x^2 + 1)",
            "sqrt(x^2 + y^2 + 1)",
            "x^2.5 + y^(-2)",
            "(x - y)/(1 + x^2)",
            "-(x*y)^2",
        ];
        let pt = [0.7, 1.3];
        for src in cases {
            let e = c.parse(src).unwrap();
            for i in 0..2 {
                let exact = e.derivative(i).eval(&pt).unwrap();
                let fd = central(&e, &pt, i);
                let scale = exact.abs().max(1.0);
                assert!((exact - fd).abs() / scale < 1e-7, "{src} d{i}: {exact} vs {fd}");
            }
        }
    }

    #[test]
    fn constant_subtrees_fold_away() {
        let c = Chart::new(&["x", "y"]).unwrap();
        let e = c.parse("y^3 + 2*x").unwrap();
        assert_eq!(e.derivative(0).as_const(), Some(2.0));
        assert!(c.parse("sin(y)").unwrap().derivative(0).is_zero());
    }
}
